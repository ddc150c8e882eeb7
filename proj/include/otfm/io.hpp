#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "otfm/grf.hpp"
#include "otfm/grid.hpp"
#include "otfm/trainer.hpp"

namespace otfm {

// ---------------------------------------------------------------------------
// Field-batch file ("FGB1"): 32-byte header followed by count*nx*ny
// little-endian f64 values, row-major per field.
//   magic[4] version:u16 dtype:u8 reserved:u8 count:u32 nx:u16 ny:u16
//   lx:f64 ly:f64
// ---------------------------------------------------------------------------

void write_field_batch(const std::string& path, const std::vector<Field>& fields);
std::vector<Field> read_field_batch(const std::string& path);
std::size_t field_batch_file_size(int count, const GridSpec& grid);

// ---------------------------------------------------------------------------
// Checkpoint file ("FCK1"): model config, kernel, flattened parameters,
// Adam moments, step counter, and the master seed. Loading reproduces
// training bitwise in single-worker mode.
// ---------------------------------------------------------------------------

struct Checkpoint {
    FnoConfig fno;
    KernelSpec kernel;
    TrainerState state;
    std::uint64_t master_seed = 0;
};

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

// ---------------------------------------------------------------------------
// Flat key=value run configuration ('#' comments). Unknown keys are
// rejected; missing keys fall back to documented defaults.
// ---------------------------------------------------------------------------

class RunConfig {
public:
    static RunConfig parse_file(const std::string& path);
    static RunConfig parse_text(const std::string& text);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long get_long(const std::string& key, long fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;

    // Typed views over the namespaced keys.
    GridSpec grid() const;
    KernelSpec kernel(const GridSpec& grid) const;
    FnoConfig fno() const;
    TrainConfig train() const;

    // Re-parseable dump of the effective configuration.
    std::string dump_effective() const;

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    void require_known_keys() const;
    std::map<std::string, std::string> values_;
    mutable std::map<std::string, std::string> effective_;
};

} // namespace otfm
