#pragma once

#include "spikedict/network.hpp"
#include "spikedict/plasticity.hpp"

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace spikedict {

// CSV emitters behind the experiment artifacts. Numeric formats are fixed so
// identical runs produce identical bytes.

/// `neuron_id,time`, one row per spike, times to 6 decimal places.
void write_raster_csv(const std::vector<Spike>& spikes, std::ostream& os);

/// `stage,layer,neuron_id,rate,imbalance` (input-layer imbalance prints empty).
void write_readout_csv(const StageReadout& readout, std::ostream& os);

/// `sample_idx,consistency_residual,mean_threshold,heldout_objective`.
void write_metrics_csv(const std::vector<MetricsRow>& rows, std::ostream& os);

/// `fb,h` pairs of the consistency scatter.
void write_scatter_csv(const MatrixXd& pairs, std::ostream& os);

std::uint64_t fnv1a_file(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& text);

std::string format_fixed(double v, int digits);

}  // namespace spikedict
