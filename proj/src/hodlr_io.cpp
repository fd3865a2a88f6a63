#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "perfpeel/errors.hpp"
#include "perfpeel/hodlr.hpp"

namespace perfpeel {

namespace {

constexpr char kMagic[8] = {'H', 'O', 'D', 'L', 'R', 'P', 'K', '\0'};

std::uint64_t fnv1a(const char* data, std::size_t size) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void raw(const char* data, std::size_t size) { out_.append(data, size); }
  void row_major(const MatrixXd& M) {
    for (Index i = 0; i < M.rows(); ++i)
      for (Index j = 0; j < M.cols(); ++j) f64(M(i, j));
  }
  std::string& bytes() { return out_; }

 private:
  void put(std::uint64_t v, int width) {
    for (int b = 0; b < width; ++b) out_.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
  }
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  void expect_raw(const char* data, std::size_t size) {
    need(size);
    if (std::memcmp(bytes_.data() + pos_, data, size) != 0) throw FormatError("bad magic");
    pos_ += size;
  }
  MatrixXd row_major(Index rows, Index cols) {
    need(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * 8);
    MatrixXd M(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) M(i, j) = f64();
    return M;
  }
  bool done() const { return pos_ == end_; }

 private:
  void need(std::size_t size) const {
    if (size > end_ - pos_) throw FormatError("truncated HODLR data");
  }
  std::uint64_t get(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int b = 0; b < width; ++b)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  const std::string& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize(const HodlrMatrix& H) {
  const auto& s = H.structure();
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kHodlrFormatVersion);
  w.u64(static_cast<std::uint64_t>(s.n));
  w.u64(static_cast<std::uint64_t>(s.k));
  w.u32(static_cast<std::uint32_t>(s.L));
  for (const auto& blocks : H.levels()) {
    for (std::size_t j = 0; j < blocks.size(); ++j) {
      w.u64(j);
      w.u64(static_cast<std::uint64_t>(blocks[j].rank()));
      w.row_major(blocks[j].Q);
      w.row_major(blocks[j].X);
    }
  }
  for (const auto& D : H.leaves()) w.row_major(D);
  std::string& out = w.bytes();
  w.u64(fnv1a(out.data(), out.size()));
  return std::move(out);
}

HodlrMatrix deserialize(const std::string& bytes) {
  if (bytes.size() < sizeof kMagic + 8) throw FormatError("truncated HODLR data");
  const std::size_t body = bytes.size() - 8;
  const std::string trailer = bytes.substr(body);
  Reader tail(trailer, 8);
  const std::uint64_t stored = tail.u64();
  if (stored != fnv1a(bytes.data(), body)) throw FormatError("HODLR checksum mismatch");

  Reader r(bytes, body);
  r.expect_raw(kMagic, sizeof kMagic);
  const std::uint32_t version = r.u32();
  if (version != kHodlrFormatVersion) {
    throw FormatError("unsupported HODLR format version " + std::to_string(version));
  }
  const auto n = static_cast<Index>(r.u64());
  const auto k = static_cast<Index>(r.u64());
  const auto L = static_cast<int>(r.u32());
  HodlrStructure s;
  try {
    s = hodlr_structure(n, k);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid HODLR header: ") + e.what());
  }
  if (s.L != L) throw FormatError("HODLR header level count does not match n and k");

  std::vector<LevelFactors> levels;
  for (int level = 1; level <= L; ++level) {
    const Index m = s.block_size(level);
    LevelFactors blocks;
    for (Index j = 0; j < s.block_count(level); ++j) {
      if (r.u64() != static_cast<std::uint64_t>(j)) throw FormatError("HODLR block index out of order");
      const std::uint64_t rank = r.u64();
      if (rank > static_cast<std::uint64_t>(m)) throw FormatError("HODLR block rank exceeds block size");
      MatrixXd Q = r.row_major(m, static_cast<Index>(rank));
      MatrixXd X = r.row_major(static_cast<Index>(rank), m);
      blocks.push_back({std::move(Q), std::move(X)});
    }
    levels.push_back(std::move(blocks));
  }
  std::vector<MatrixXd> leaves;
  for (Index i = 0; i < s.block_count(L); ++i) leaves.push_back(r.row_major(s.n_base, s.n_base));
  if (!r.done()) throw FormatError("trailing bytes in HODLR data");
  return HodlrMatrix(s, std::move(levels), std::move(leaves), RankPolicy::relaxed);
}

void save_hodlr(const std::string& path, const HodlrMatrix& H) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  const std::string bytes = serialize(H);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path);
}

HodlrMatrix load_hodlr(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace perfpeel
