#include "otfm/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are unsupported");

namespace otfm {

namespace {

template <typename T>
void put(std::ostream& os, T value) {
    os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T take(std::istream& is, const char* what) {
    T value;
    is.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!is) throw std::runtime_error(std::string("unexpected end of file reading ") + what);
    return value;
}

void put_doubles(std::ostream& os, const double* data, std::size_t n) {
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

void take_doubles(std::istream& is, double* data, std::size_t n, const char* what) {
    is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw std::runtime_error(std::string("unexpected end of file reading ") + what);
}

void put_magic(std::ostream& os, const char magic[5]) { os.write(magic, 4); }

void check_magic(std::istream& is, const char magic[5], const char* what) {
    char buf[4];
    is.read(buf, 4);
    if (!is || std::memcmp(buf, magic, 4) != 0)
        throw std::runtime_error(std::string(what) + ": bad magic bytes");
}

} // namespace

std::size_t field_batch_file_size(int count, const GridSpec& grid) {
    return 32 + 8ull * static_cast<std::size_t>(count) * grid.num_nodes();
}

void write_field_batch(const std::string& path, const std::vector<Field>& fields) {
    if (fields.empty()) throw std::invalid_argument("write_field_batch: no fields");
    const GridSpec grid = fields.front().grid;
    grid.validate();
    if (grid.nx > 0xffff || grid.ny > 0xffff)
        throw std::invalid_argument("write_field_batch: grid too large for the format");
    for (const auto& f : fields) require_same_grid(f.grid, grid, "write_field_batch");

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("write_field_batch: cannot open " + path);
    put_magic(os, "FGB1");
    put<std::uint16_t>(os, 1);
    put<std::uint8_t>(os, 1); // dtype: f64
    put<std::uint8_t>(os, 0); // reserved
    put<std::uint32_t>(os, static_cast<std::uint32_t>(fields.size()));
    put<std::uint16_t>(os, static_cast<std::uint16_t>(grid.nx));
    put<std::uint16_t>(os, static_cast<std::uint16_t>(grid.ny));
    put<double>(os, grid.lx);
    put<double>(os, grid.ly);
    for (const auto& f : fields) put_doubles(os, f.values.data(), f.values.size());
    if (!os) throw std::runtime_error("write_field_batch: write failed for " + path);
}

std::vector<Field> read_field_batch(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_field_batch: cannot open " + path);
    check_magic(is, "FGB1", "read_field_batch");
    const auto version = take<std::uint16_t>(is, "version");
    if (version != 1) throw std::runtime_error("read_field_batch: unsupported version");
    const auto dtype = take<std::uint8_t>(is, "dtype");
    if (dtype != 1) throw std::runtime_error("read_field_batch: unsupported dtype");
    take<std::uint8_t>(is, "reserved");
    const auto count = take<std::uint32_t>(is, "count");
    GridSpec grid;
    grid.nx = take<std::uint16_t>(is, "nx");
    grid.ny = take<std::uint16_t>(is, "ny");
    grid.lx = take<double>(is, "lx");
    grid.ly = take<double>(is, "ly");
    grid.validate();

    std::vector<Field> fields;
    fields.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        Field f(grid);
        take_doubles(is, f.values.data(), f.values.size(), "field payload");
        fields.push_back(std::move(f));
    }
    is.peek();
    if (!is.eof()) throw std::runtime_error("read_field_batch: trailing bytes after payload");
    return fields;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    ckpt.fno.validate();
    ckpt.kernel.validate();
    const auto shapes = parameter_shapes(ckpt.fno);
    std::size_t total = 0;
    for (const auto& [name, shape] : shapes) {
        std::size_t n = 1;
        for (int d : shape) n *= static_cast<std::size_t>(d);
        total += n;
    }
    if (ckpt.state.params.flat.size() != total || ckpt.state.adam.m.size() != total ||
        ckpt.state.adam.v.size() != total)
        throw std::invalid_argument("write_checkpoint: state does not match the model config");

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("write_checkpoint: cannot open " + path);
    put_magic(os, "FCK1");
    put<std::uint16_t>(os, 1);
    put<std::int32_t>(os, ckpt.fno.n_layers);
    put<std::int32_t>(os, ckpt.fno.modes);
    put<std::int32_t>(os, ckpt.fno.width);
    put<std::int32_t>(os, ckpt.fno.lift_dim);
    put<std::int32_t>(os, ckpt.fno.proj_dim);
    put<double>(os, ckpt.kernel.nu);
    put<double>(os, ckpt.kernel.length_scale);
    put<double>(os, ckpt.kernel.variance);
    put<double>(os, ckpt.kernel.mean);
    put<std::int64_t>(os, ckpt.state.step);
    put<std::int64_t>(os, ckpt.state.adam.step);
    put<std::uint64_t>(os, ckpt.master_seed);

    put<std::uint32_t>(os, static_cast<std::uint32_t>(shapes.size()));
    std::size_t offset = 0;
    for (const auto& [name, shape] : shapes) {
        put<std::uint32_t>(os, static_cast<std::uint32_t>(shape.size()));
        std::size_t n = 1;
        for (int d : shape) {
            put<std::uint32_t>(os, static_cast<std::uint32_t>(d));
            n *= static_cast<std::size_t>(d);
        }
        put_doubles(os, ckpt.state.params.flat.data() + offset, n);
        offset += n;
    }
    put_doubles(os, ckpt.state.adam.m.data(), total);
    put_doubles(os, ckpt.state.adam.v.data(), total);
    if (!os) throw std::runtime_error("write_checkpoint: write failed for " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_checkpoint: cannot open " + path);
    check_magic(is, "FCK1", "read_checkpoint");
    const auto version = take<std::uint16_t>(is, "version");
    if (version != 1) throw std::runtime_error("read_checkpoint: unsupported version");

    Checkpoint ckpt;
    ckpt.fno.n_layers = take<std::int32_t>(is, "n_layers");
    ckpt.fno.modes = take<std::int32_t>(is, "modes");
    ckpt.fno.width = take<std::int32_t>(is, "width");
    ckpt.fno.lift_dim = take<std::int32_t>(is, "lift_dim");
    ckpt.fno.proj_dim = take<std::int32_t>(is, "proj_dim");
    ckpt.kernel.nu = take<double>(is, "nu");
    ckpt.kernel.length_scale = take<double>(is, "length_scale");
    ckpt.kernel.variance = take<double>(is, "variance");
    ckpt.kernel.mean = take<double>(is, "mean");
    ckpt.state.step = take<std::int64_t>(is, "step");
    ckpt.state.adam.step = take<std::int64_t>(is, "adam step");
    ckpt.master_seed = take<std::uint64_t>(is, "seed");
    ckpt.fno.validate();
    ckpt.kernel.validate();

    const auto expect = parameter_shapes(ckpt.fno);
    const auto n_tensors = take<std::uint32_t>(is, "tensor count");
    if (n_tensors != expect.size()) throw std::runtime_error("read_checkpoint: tensor count mismatch");
    std::size_t total = 0;
    ckpt.state.params.config = ckpt.fno;
    ckpt.state.params.flat.resize(static_cast<std::size_t>(count_params(ckpt.fno)));
    for (const auto& [name, shape] : expect) {
        const auto rank = take<std::uint32_t>(is, "rank");
        if (rank != shape.size()) throw std::runtime_error("read_checkpoint: rank mismatch in " + name);
        std::size_t n = 1;
        for (int d : shape) {
            const auto got = take<std::uint32_t>(is, "dim");
            if (got != static_cast<std::uint32_t>(d))
                throw std::runtime_error("read_checkpoint: shape mismatch in " + name);
            n *= static_cast<std::size_t>(d);
        }
        take_doubles(is, ckpt.state.params.flat.data() + total, n, name.c_str());
        total += n;
    }
    ckpt.state.adam.m.resize(total);
    ckpt.state.adam.v.resize(total);
    take_doubles(is, ckpt.state.adam.m.data(), total, "adam m");
    take_doubles(is, ckpt.state.adam.v.data(), total, "adam v");
    is.peek();
    if (!is.eof()) throw std::runtime_error("read_checkpoint: trailing bytes");
    return ckpt;
}

// ---------------------------------------------------------------------------
// RunConfig
// ---------------------------------------------------------------------------

namespace {

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{
        "grid.nx",          "grid.ny",           "grid.lx",            "grid.ly",
        "kernel.nu",        "kernel.length_scale", "kernel.variance",  "kernel.mean",
        "fno.layers",       "fno.modes",         "fno.width",          "fno.lift",
        "fno.proj",         "train.batch",       "train.epochs",       "train.lr",
        "train.warmup_frac", "train.min_lr",     "train.warmup_floor_lr",
        "train.coupling",   "train.sigma_min",   "train.seed",         "train.precision",
        "train.checkpoint_every", "train.per_sample_t", "train.clip_norm",
        "sample.scheme",    "sample.steps",      "sample.count",
        "datagen.kind",     "datagen.re",        "datagen.n_forcing",  "datagen.dt",
        "datagen.snapshots", "datagen.spinup",   "datagen.interval",   "datagen.trajectories",
        "datagen.init_amplitude", "datagen.mixture_shift", "datagen.mixture_weight",
    };
    return keys;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

} // namespace

RunConfig RunConfig::parse_text(const std::string& text) {
    RunConfig config;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key or value");
        if (config.values_.count(key))
            throw std::invalid_argument("config: duplicate key " + key);
        config.values_[key] = value;
    }
    config.require_known_keys();
    return config;
}

RunConfig RunConfig::parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_text(buf.str());
}

void RunConfig::require_known_keys() const {
    for (const auto& [key, value] : values_)
        if (!known_keys().count(key)) throw std::invalid_argument("config: unknown key " + key);
}

bool RunConfig::has(const std::string& key) const { return values_.count(key) > 0; }

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    const std::string v = it == values_.end() ? fallback : it->second;
    effective_[key] = v;
    return v;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    double v = fallback;
    if (it != values_.end()) {
        std::size_t used = 0;
        v = std::stod(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("config: bad number for " + key);
    }
    std::ostringstream os;
    os.precision(17);
    os << v;
    effective_[key] = os.str();
    return v;
}

long RunConfig::get_long(const std::string& key, long fallback) const {
    const auto it = values_.find(key);
    long v = fallback;
    if (it != values_.end()) {
        std::size_t used = 0;
        v = std::stol(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("config: bad integer for " + key);
    }
    effective_[key] = std::to_string(v);
    return v;
}

std::uint64_t RunConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto it = values_.find(key);
    std::uint64_t v = fallback;
    if (it != values_.end()) {
        std::size_t used = 0;
        v = std::stoull(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("config: bad integer for " + key);
    }
    effective_[key] = std::to_string(v);
    return v;
}

GridSpec RunConfig::grid() const {
    GridSpec g;
    g.nx = static_cast<int>(get_long("grid.nx", 64));
    g.ny = static_cast<int>(get_long("grid.ny", 64));
    g.lx = get_double("grid.lx", 6.283185307179586);
    g.ly = get_double("grid.ly", 6.283185307179586);
    g.validate();
    return g;
}

KernelSpec RunConfig::kernel(const GridSpec& grid) const {
    KernelSpec k;
    k.nu = get_double("kernel.nu", 0.5);
    k.length_scale = get_double("kernel.length_scale", grid.lx / 8.0);
    k.variance = get_double("kernel.variance", 1.0);
    k.mean = get_double("kernel.mean", 0.0);
    k.validate();
    return k;
}

FnoConfig RunConfig::fno() const {
    FnoConfig f;
    f.n_layers = static_cast<int>(get_long("fno.layers", 4));
    f.modes = static_cast<int>(get_long("fno.modes", 8));
    f.width = static_cast<int>(get_long("fno.width", 32));
    f.lift_dim = static_cast<int>(get_long("fno.lift", 64));
    f.proj_dim = static_cast<int>(get_long("fno.proj", 64));
    f.validate();
    return f;
}

TrainConfig RunConfig::train() const {
    TrainConfig t;
    t.batch_size = static_cast<int>(get_long("train.batch", 128));
    t.epochs = static_cast<int>(get_long("train.epochs", 500));
    t.base_lr = get_double("train.lr", 1e-4);
    t.warmup_frac = get_double("train.warmup_frac", 0.10);
    t.min_lr = get_double("train.min_lr", 1e-6);
    t.warmup_floor_lr = get_double("train.warmup_floor_lr", 1e-10);
    const std::string coupling = get_string("train.coupling", "ot");
    if (coupling == "ot")
        t.coupling = TrainConfig::Coupling::Ot;
    else if (coupling == "independent")
        t.coupling = TrainConfig::Coupling::Independent;
    else
        throw std::invalid_argument("config: train.coupling must be 'ot' or 'independent'");
    const double sigma_min = get_double("train.sigma_min", 0.0);
    t.path = sigma_min > 0.0 ? PathKind::ffm_gaussian(sigma_min) : PathKind::ot_displacement();
    t.seed = get_u64("train.seed", 0);
    t.checkpoint_every = static_cast<int>(get_long("train.checkpoint_every", 0));
    t.per_sample_t = get_long("train.per_sample_t", 0) != 0;
    t.clip_norm = get_double("train.clip_norm", 0.0);
    const std::string precision = get_string("train.precision", "f64");
    if (precision == "f32")
        t.f32 = true;
    else if (precision == "f64")
        t.f32 = false;
    else
        throw std::invalid_argument("config: train.precision must be 'f32' or 'f64'");
    t.validate();
    return t;
}

std::string RunConfig::dump_effective() const {
    std::ostringstream os;
    for (const auto& [key, value] : effective_) os << key << " = " << value << "\n";
    return os.str();
}

} // namespace otfm
