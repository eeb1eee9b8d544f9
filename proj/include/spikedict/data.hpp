#pragma once

#include "spikedict/network.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace spikedict {

struct DatasetMeta {
  std::string source;
  std::vector<std::string> steps; // preprocessing chain, in order
  std::uint64_t seed = 0;
  long dropped = 0; // patches removed by preprocessing
};

/// Rows are samples; all entries nonnegative (network inputs are rate drives).
struct Dataset {
  MatrixXd samples;
  DatasetMeta meta;
  long count() const { return samples.rows(); }
  int dim() const { return static_cast<int>(samples.cols()); }
};

struct GroundTruth {
  MatrixXd dictionary; // M x N, unit-norm nonnegative columns
  MatrixXd codes;      // P x N, k-sparse nonnegative rows
};

/// k-sparse nonnegative mixtures of a random unit-column dictionary, plus
/// optional Gaussian noise clamped so samples stay nonnegative.
std::pair<Dataset, GroundTruth> gen_synthetic(int dim, int atoms, int sparsity, long count,
                                              double noise_sigma, std::uint64_t seed);

/// Probe stream for consistency training: each sample drives `sparsity`
/// input dimensions with values uniform on [0.5, 1.5] * scale.
Dataset gen_sparse_drive(int dim, int sparsity, long count, double scale, std::uint64_t seed);

/// Random patch_edge x patch_edge crops, flattened row-major, one per row.
MatrixXd sample_patches(const MatrixXd& image, int patch_edge, long count, std::uint64_t seed);

/// Per patch: subtract the mean, normalize to unit length (zero patches are
/// dropped), then split into positive and negative channels, doubling the
/// dimension.
Dataset preprocess_split(const MatrixXd& patches);

class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// IDX image container (magic 0x00000803), pixel values scaled to [0, 1].
std::vector<MatrixXd> load_idx_images(const std::filesystem::path& path);

/// Portable graymap, P5 or P2, scaled to [0, 1].
MatrixXd load_pgm(const std::filesystem::path& path);

// DLM1 matrix container: "DLM1", u32 LE rows, u32 LE cols, then rows*cols
// IEEE-754 float64 LE, row-major. Writes go through a temp file + rename.
void save_matrix(const MatrixXd& m, const std::filesystem::path& path);
MatrixXd load_matrix(const std::filesystem::path& path);

// Network checkpoint: `key = value` text header (gamma, lambda, matrix list)
// terminated by `end-header`, followed by DLM1 blocks for F, B, H, L.
void save_params(const NetworkParams& params, const std::filesystem::path& path);
NetworkParams load_params(const std::filesystem::path& path);

/// True when the file holds a bare DLM1 matrix rather than a params manifest.
bool is_matrix_checkpoint(const std::filesystem::path& path);

void write_dataset_csv(const MatrixXd& samples, std::ostream& os);

}  // namespace spikedict
