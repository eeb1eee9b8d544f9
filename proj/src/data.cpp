#include "spikedict/data.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace spikedict {

namespace {

std::vector<int> sample_support(std::mt19937_64& rng, int n, int k) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  // partial Fisher-Yates: first k entries are the support
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

std::pair<Dataset, GroundTruth> gen_synthetic(int dim, int atoms, int sparsity, long count,
                                              double noise_sigma, std::uint64_t seed) {
  if (dim < 1 || atoms < 1 || count < 0) throw std::invalid_argument("gen_synthetic: bad sizes");
  if (sparsity < 0 || sparsity > atoms)
    throw std::invalid_argument("gen_synthetic: sparsity must lie in [0, atoms]");
  if (noise_sigma < 0.0) throw std::invalid_argument("gen_synthetic: negative noise");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> coeff(0.5, 1.5);
  std::normal_distribution<double> noise(0.0, 1.0);

  GroundTruth gt;
  gt.dictionary.resize(dim, atoms);
  for (int j = 0; j < atoms; ++j) {
    for (int i = 0; i < dim; ++i) gt.dictionary(i, j) = unit(rng);
    const double nrm = gt.dictionary.col(j).norm();
    if (nrm > 0.0) gt.dictionary.col(j) /= nrm;
  }
  gt.codes = MatrixXd::Zero(count, atoms);

  Dataset ds;
  ds.samples.resize(count, dim);
  ds.meta.source = "synthetic";
  ds.meta.seed = seed;
  ds.meta.steps = {"k-sparse codes", "dictionary mix"};
  if (noise_sigma > 0.0) ds.meta.steps.push_back("clamped noise");

  for (long p = 0; p < count; ++p) {
    for (int s : sample_support(rng, atoms, sparsity)) gt.codes(p, s) = coeff(rng);
    VectorXd x = gt.dictionary * gt.codes.row(p).transpose();
    if (noise_sigma > 0.0)
      for (int i = 0; i < dim; ++i) x[i] += noise_sigma * noise(rng);
    ds.samples.row(p) = x.cwiseMax(0.0);
  }
  return {std::move(ds), std::move(gt)};
}

Dataset gen_sparse_drive(int dim, int sparsity, long count, double scale, std::uint64_t seed) {
  if (dim < 1 || count < 0) throw std::invalid_argument("gen_sparse_drive: bad sizes");
  if (sparsity < 0 || sparsity > dim) throw std::invalid_argument("gen_sparse_drive: bad sparsity");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coeff(0.5, 1.5);

  Dataset ds;
  ds.samples = MatrixXd::Zero(count, dim);
  ds.meta.source = "sparse-drive";
  ds.meta.seed = seed;
  for (long p = 0; p < count; ++p)
    for (int s : sample_support(rng, dim, sparsity)) ds.samples(p, s) = scale * coeff(rng);
  return ds;
}

MatrixXd sample_patches(const MatrixXd& image, int patch_edge, long count, std::uint64_t seed) {
  if (patch_edge < 1) throw std::invalid_argument("sample_patches: patch edge must be positive");
  if (image.rows() < patch_edge || image.cols() < patch_edge)
    throw std::invalid_argument("sample_patches: image smaller than the patch");
  if (count < 0) throw std::invalid_argument("sample_patches: negative count");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> row_pick(0, static_cast<int>(image.rows()) - patch_edge);
  std::uniform_int_distribution<int> col_pick(0, static_cast<int>(image.cols()) - patch_edge);

  MatrixXd patches(count, patch_edge * patch_edge);
  for (long p = 0; p < count; ++p) {
    const int r = row_pick(rng);
    const int c = col_pick(rng);
    long k = 0;
    for (int i = 0; i < patch_edge; ++i)
      for (int j = 0; j < patch_edge; ++j) patches(p, k++) = image(r + i, c + j);
  }
  return patches;
}

Dataset preprocess_split(const MatrixXd& patches) {
  const long p_in = patches.rows();
  const int d = static_cast<int>(patches.cols());

  std::vector<VectorXd> kept;
  kept.reserve(p_in);
  long dropped = 0;
  for (long p = 0; p < p_in; ++p) {
    VectorXd v = patches.row(p);
    v.array() -= v.mean();
    const double nrm = v.norm();
    if (nrm <= 1e-12) {
      ++dropped;
      continue;
    }
    v /= nrm;
    kept.push_back(std::move(v));
  }

  Dataset ds;
  ds.samples.resize(static_cast<long>(kept.size()), 2 * d);
  for (long p = 0; p < static_cast<long>(kept.size()); ++p) {
    ds.samples.row(p).head(d) = kept[p].cwiseMax(0.0);
    ds.samples.row(p).tail(d) = (-kept[p]).cwiseMax(0.0);
  }
  ds.meta.source = "patches";
  ds.meta.steps = {"mean-subtract", "normalize", "split-pos-neg"};
  ds.meta.dropped = dropped;
  return ds;
}

namespace {

std::uint32_t read_be32(std::istream& is, const char* what, long offset) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is)
    throw ParseError(std::string("idx: truncated while reading ") + what + " at offset " +
                     std::to_string(offset));
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

}  // namespace

std::vector<MatrixXd> load_idx_images(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("idx: cannot open " + path.string());

  const std::uint32_t magic = read_be32(is, "magic", 0);
  if (magic != 0x00000803u) {
    std::ostringstream os;
    os << "idx: bad magic 0x" << std::hex << magic << " at offset 0 in " << path.string()
       << " (expected image magic 0x803)";
    throw ParseError(os.str());
  }
  const std::uint32_t count = read_be32(is, "count", 4);
  const std::uint32_t rows = read_be32(is, "rows", 8);
  const std::uint32_t cols = read_be32(is, "cols", 12);
  if (rows == 0 || cols == 0) throw ParseError("idx: zero image dimensions in " + path.string());

  std::vector<MatrixXd> images;
  images.reserve(count);
  std::vector<unsigned char> buf(static_cast<size_t>(rows) * cols);
  for (std::uint32_t n = 0; n < count; ++n) {
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!is)
      throw ParseError("idx: truncated payload at image " + std::to_string(n) + " in " +
                       path.string());
    MatrixXd img(rows, cols);
    for (std::uint32_t i = 0; i < rows; ++i)
      for (std::uint32_t j = 0; j < cols; ++j)
        img(i, j) = static_cast<double>(buf[static_cast<size_t>(i) * cols + j]) / 255.0;
    images.push_back(std::move(img));
  }
  is.peek();
  if (!is.eof()) throw ParseError("idx: trailing bytes after payload in " + path.string());
  return images;
}

MatrixXd load_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("pgm: cannot open " + path.string());

  std::string magic;
  is >> magic;
  if (magic != "P5" && magic != "P2") throw ParseError("pgm: unsupported magic " + magic);

  auto next_token = [&is]() {
    std::string tok;
    while (is >> tok) {
      if (tok[0] == '#') {
        std::string rest;
        std::getline(is, rest);
        continue;
      }
      return tok;
    }
    throw ParseError("pgm: truncated header");
  };

  const long cols = std::stol(next_token());
  const long rows = std::stol(next_token());
  const long maxval = std::stol(next_token());
  if (cols < 1 || rows < 1 || maxval < 1 || maxval > 65535) throw ParseError("pgm: bad header");

  MatrixXd img(rows, cols);
  if (magic == "P2") {
    for (long i = 0; i < rows; ++i)
      for (long j = 0; j < cols; ++j) {
        long v = std::stol(next_token());
        img(i, j) = static_cast<double>(v) / static_cast<double>(maxval);
      }
  } else {
    is.get(); // single whitespace after maxval
    const int bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> buf(static_cast<size_t>(rows) * cols * bytes);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!is) throw ParseError("pgm: truncated pixel data");
    for (long i = 0; i < rows; ++i)
      for (long j = 0; j < cols; ++j) {
        const size_t k = (static_cast<size_t>(i) * cols + j) * bytes;
        const long v = bytes == 1 ? buf[k] : (long(buf[k]) << 8) | buf[k + 1];
        img(i, j) = static_cast<double>(v) / static_cast<double>(maxval);
      }
  }
  return img;
}

namespace {

constexpr char kMatrixMagic[4] = {'D', 'L', 'M', '1'};

void write_u32_le(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32_le(std::istream& is, const std::string& ctx) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw ParseError(ctx + ": truncated header");
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
         (std::uint32_t(b[3]) << 24);
}

void write_matrix_block(std::ostream& os, const MatrixXd& m) {
  os.write(kMatrixMagic, 4);
  write_u32_le(os, static_cast<std::uint32_t>(m.rows()));
  write_u32_le(os, static_cast<std::uint32_t>(m.cols()));
  static_assert(sizeof(double) == 8);
  for (long i = 0; i < m.rows(); ++i)
    for (long j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      os.write(reinterpret_cast<const char*>(&v), 8);
    }
}

MatrixXd read_matrix_block(std::istream& is, const std::string& ctx) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMatrixMagic, 4) != 0)
    throw ParseError(ctx + ": bad matrix magic (expected DLM1)");
  const std::uint32_t rows = read_u32_le(is, ctx);
  const std::uint32_t cols = read_u32_le(is, ctx);
  if (static_cast<std::uint64_t>(rows) * cols > (1ull << 31))
    throw ParseError(ctx + ": implausible matrix size");
  MatrixXd m(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i)
    for (std::uint32_t j = 0; j < cols; ++j) {
      double v;
      is.read(reinterpret_cast<char*>(&v), 8);
      if (!is) throw ParseError(ctx + ": truncated matrix payload");
      m(i, j) = v;
    }
  return m;
}

class AtomicFileWriter {
 public:
  explicit AtomicFileWriter(const std::filesystem::path& path)
      : final_(path), tmp_(path.string() + ".tmp"), os_(tmp_, std::ios::binary | std::ios::trunc) {
    if (!os_) throw std::runtime_error("cannot write " + tmp_.string());
  }
  std::ostream& stream() { return os_; }
  void commit() {
    os_.flush();
    if (!os_) throw std::runtime_error("write failed for " + tmp_.string());
    os_.close();
    std::filesystem::rename(tmp_, final_);
  }
  ~AtomicFileWriter() {
    if (os_.is_open()) {
      os_.close();
      std::error_code ec;
      std::filesystem::remove(tmp_, ec);
    }
  }

 private:
  std::filesystem::path final_;
  std::filesystem::path tmp_;
  std::ofstream os_;
};

}  // namespace

void save_matrix(const MatrixXd& m, const std::filesystem::path& path) {
  AtomicFileWriter w(path);
  write_matrix_block(w.stream(), m);
  w.commit();
}

MatrixXd load_matrix(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("matrix: cannot open " + path.string());
  MatrixXd m = read_matrix_block(is, "matrix " + path.string());
  is.peek();
  if (!is.eof()) throw ParseError("matrix: trailing bytes in " + path.string());
  return m;
}

void save_params(const NetworkParams& params, const std::filesystem::path& path) {
  params.validate();
  AtomicFileWriter w(path);
  std::ostream& os = w.stream();
  os << "format = spikedict-params-v1\n";
  os << "gamma = " << std::hexfloat << params.gamma << "\n";
  os << "lambda = " << std::hexfloat << params.lambda << "\n";
  os << std::defaultfloat;
  os << "matrices = F B H L\n";
  os << "end-header\n";
  write_matrix_block(os, params.F);
  write_matrix_block(os, params.B);
  write_matrix_block(os, params.H);
  write_matrix_block(os, params.L);
  w.commit();
}

NetworkParams load_params(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("params: cannot open " + path.string());

  NetworkParams p;
  bool saw_format = false;
  std::string line;
  while (std::getline(is, line)) {
    if (line == "end-header") break;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw ParseError("params: malformed header line: " + line);
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 3);
    if (key == "format") {
      if (value != "spikedict-params-v1") throw ParseError("params: unknown format " + value);
      saw_format = true;
    } else if (key == "gamma") {
      p.gamma = std::strtod(value.c_str(), nullptr);
    } else if (key == "lambda") {
      p.lambda = std::strtod(value.c_str(), nullptr);
    } else if (key == "matrices") {
      if (value != "F B H L") throw ParseError("params: unexpected matrix list " + value);
    } else {
      throw ParseError("params: unknown header key " + key);
    }
  }
  if (!saw_format) throw ParseError("params: missing format header in " + path.string());

  p.F = read_matrix_block(is, "params F");
  p.B = read_matrix_block(is, "params B");
  p.H = read_matrix_block(is, "params H");
  MatrixXd l = read_matrix_block(is, "params L");
  if (l.cols() != 1) throw ParseError("params: L must be a column vector");
  p.L = l.col(0);
  p.validate();
  return p;
}

bool is_matrix_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("checkpoint: cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  return is && std::memcmp(magic, kMatrixMagic, 4) == 0;
}

void write_dataset_csv(const MatrixXd& samples, std::ostream& os) {
  os << "sample_idx";
  for (long j = 0; j < samples.cols(); ++j) os << ",dim_" << j;
  os << "\n";
  for (long i = 0; i < samples.rows(); ++i) {
    os << i;
    char buf[40];
    for (long j = 0; j < samples.cols(); ++j) {
      std::snprintf(buf, sizeof buf, ",%.17g", samples(i, j));
      os << buf;
    }
    os << "\n";
  }
}

}  // namespace spikedict
