#pragma once

#include "spikedict/config.hpp"
#include "spikedict/data.hpp"
#include "spikedict/plasticity.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace spikedict {

// Command entry points shared by the CLI binary and the test suites. Each
// writes its artifacts plus a run manifest under out_dir and returns the
// process exit code (0 success; throwing callers map errors to 1/2).

int run_encode(const Config& cfg, const std::filesystem::path& out_dir, std::uint64_t seed);
int run_train(const Config& cfg, const std::filesystem::path& out_dir, std::uint64_t seed);
int run_train_sgd(const Config& cfg, const std::filesystem::path& out_dir, std::uint64_t seed);
int run_eval(const Config& cfg, const std::filesystem::path& out_dir, std::uint64_t seed);

/// Dataset selected by the data.* keys; ground truth is non-empty only for
/// synthetic sources.
std::pair<Dataset, GroundTruth> load_dataset(const Config& cfg, std::uint64_t seed);

StageConfig stage_config_from(const Config& cfg);

struct ManifestEntry {
  std::string path; // relative to the run directory
  std::uint64_t hash;
};

void write_manifest(const std::filesystem::path& out_dir, const std::string& command,
                    const Config& cfg, std::uint64_t seed, double wall_ms,
                    const std::vector<ManifestEntry>& outputs);

}  // namespace spikedict
