#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "smile/diagnostics.hpp"
#include "smile/lmm.hpp"
#include "smile/trainer.hpp"

namespace smile {

// Cube/abundance container: a JSON sidecar `<stem>.json` (height, width,
// channels, dtype "f32", layout "bip", endianness "little") next to a raw
// `<stem>.bin` of 32-bit little-endian floats, pixel-major band-interleaved.
// Doubles are truncated to f32 on write; a read-write cycle of an existing
// file is byte-lossless.

void write_cube(const std::filesystem::path& stem, const HsiCube& cube);
HsiCube read_cube(const std::filesystem::path& stem);

void write_abundance(const std::filesystem::path& stem, const AbundanceMap& map);
AbundanceMap read_abundance(const std::filesystem::path& stem);

/// One endmember per row, comma-separated reflectances.
void write_endmembers_csv(const std::filesystem::path& path, const EndmemberMatrix& e);

void write_history_csv(const std::filesystem::path& path, const std::vector<StepLog>& history);
void write_affinity_csv(const std::filesystem::path& path,
                        const std::vector<AffinityRecord>& records);

/// 8-bit binary PGM normalized by the channel maximum.
void write_pgm(const std::filesystem::path& path, const AbundanceMap& map, int channel);

void write_kernel_csv(const std::filesystem::path& path, const Eigen::MatrixXd& kernel);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace smile
