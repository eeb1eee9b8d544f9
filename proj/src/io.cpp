#include "spikedict/io.hpp"

#include <cstdio>
#include <fstream>

namespace spikedict {

std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_raster_csv(const std::vector<Spike>& spikes, std::ostream& os) {
  os << "neuron_id,time\n";
  for (const Spike& s : spikes) os << s.neuron << ',' << format_fixed(s.time, 6) << '\n';
}

void write_readout_csv(const StageReadout& readout, std::ostream& os) {
  const char* stage = readout.stage == Stage::feedforward ? "feedforward" : "feedback";
  os << "stage,layer,neuron_id,rate,imbalance\n";
  for (long i = 0; i < readout.y.size(); ++i)
    os << stage << ",input," << i << ',' << g17(readout.y[i]) << ",\n";
  for (long i = 0; i < readout.z.size(); ++i)
    os << stage << ",code," << i << ',' << g17(readout.z[i]) << ',' << g17(readout.e[i]) << '\n';
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, std::ostream& os) {
  os << "sample_idx,consistency_residual,mean_threshold,heldout_objective\n";
  for (const MetricsRow& r : rows) {
    os << r.sample_idx << ',' << g17(r.consistency_residual) << ',' << g17(r.mean_threshold)
       << ',';
    if (r.heldout_objective) os << g17(*r.heldout_objective);
    os << '\n';
  }
}

void write_scatter_csv(const MatrixXd& pairs, std::ostream& os) {
  os << "fb,h\n";
  for (long i = 0; i < pairs.rows(); ++i)
    os << g17(pairs(i, 0)) << ',' << g17(pairs(i, 1)) << '\n';
}

std::uint64_t fnv1a_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("hash: cannot open " + path.string());
  std::uint64_t h = 1469598103934665603ull;
  char buf[4096];
  while (is) {
    is.read(buf, sizeof buf);
    const std::streamsize got = is.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  return h;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

}  // namespace spikedict
