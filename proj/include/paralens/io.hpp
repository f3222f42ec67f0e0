#pragma once

#include <zlib.h>

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "paralens/boolean.hpp"
#include "paralens/trainer.hpp"

namespace paralens {

// ---------------------------------------------------------------------------
// IDX files, plain or gzip-compressed.

namespace detail {

/// Reads a whole file through zlib, which passes uncompressed files through.
inline std::vector<unsigned char> read_maybe_gzip(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw Error(ErrorCode::TruncatedFile, "cannot open " + path);
  std::vector<unsigned char> out;
  std::array<unsigned char, 1 << 16> buf;
  for (;;) {
    const int n = gzread(f, buf.data(), unsigned(buf.size()));
    if (n < 0) {
      int code = 0;
      std::string msg = gzerror(f, &code);
      gzclose(f);
      throw Error(ErrorCode::TruncatedFile, path + ": " + msg);
    }
    if (n == 0) break;
    out.insert(out.end(), buf.begin(), buf.begin() + n);
  }
  gzclose(f);
  return out;
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t off, const std::string& path) {
  if (off + 4 > b.size()) throw Error(ErrorCode::TruncatedFile, path + ": header ends early");
  return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) | (std::uint32_t(b[off + 2]) << 8) | b[off + 3];
}

}  // namespace detail

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

struct IdxImages {
  std::size_t rows = 0, cols = 0;
  std::vector<Tensor> images;  // rows x cols, pixels scaled to [0, 1]
};

inline IdxImages read_idx_images(const std::string& path) {
  const auto b = detail::read_maybe_gzip(path);
  const auto magic = detail::read_be32(b, 0, path);
  if (magic != kIdxImagesMagic) {
    std::ostringstream os;
    os << path << ": magic 0x" << std::hex << std::setw(8) << std::setfill('0') << magic << ", expected 0x00000803";
    throw Error(ErrorCode::BadMagic, os.str());
  }
  const std::size_t n = detail::read_be32(b, 4, path), rows = detail::read_be32(b, 8, path), cols = detail::read_be32(b, 12, path);
  const std::size_t need = 16 + n * rows * cols;
  if (b.size() < need)
    throw Error(ErrorCode::TruncatedFile, path + ": " + std::to_string(b.size()) + " bytes, header promises " + std::to_string(need));
  IdxImages out{rows, cols, {}};
  out.images.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> px(rows * cols);
    const unsigned char* src = b.data() + 16 + i * rows * cols;
    for (std::size_t j = 0; j < px.size(); ++j) px[j] = src[j] / 255.0;
    out.images.push_back(Tensor::real(Shape{rows, cols}, std::move(px)));
  }
  return out;
}

inline std::vector<std::uint8_t> read_idx_labels(const std::string& path) {
  const auto b = detail::read_maybe_gzip(path);
  const auto magic = detail::read_be32(b, 0, path);
  if (magic != kIdxLabelsMagic) {
    std::ostringstream os;
    os << path << ": magic 0x" << std::hex << std::setw(8) << std::setfill('0') << magic << ", expected 0x00000801";
    throw Error(ErrorCode::BadMagic, os.str());
  }
  const std::size_t n = detail::read_be32(b, 4, path);
  if (b.size() < 8 + n) throw Error(ErrorCode::TruncatedFile, path + ": fewer labels than the header promises");
  return {b.begin() + 8, b.begin() + 8 + std::ptrdiff_t(n)};
}

inline Tensor one_hot(std::size_t k, std::size_t n) {
  if (k >= n) throw Error(ErrorCode::ValidationError, "label " + std::to_string(k) + " outside " + std::to_string(n) + " classes");
  std::vector<double> v(n, 0.0);
  v[k] = 1.0;
  return Tensor::real(Shape{n}, std::move(v));
}

/// Images paired with one-hot labels (10 classes). `flatten` turns each
/// rows x cols image into a vector; `limit` keeps the first items only.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path, bool flatten_images = true,
                        std::size_t limit = std::numeric_limits<std::size_t>::max()) {
  IdxImages imgs = read_idx_images(images_path);
  const auto labels = read_idx_labels(labels_path);
  if (imgs.images.size() != labels.size())
    throw Error(ErrorCode::CountMismatch, std::to_string(imgs.images.size()) + " images but " + std::to_string(labels.size()) + " labels");
  Dataset out;
  const std::size_t n = std::min(limit, labels.size());
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor x = flatten_images ? imgs.images[i].reshape(Shape{imgs.rows * imgs.cols}) : imgs.images[i];
    out.push_back({{x}, {one_hot(labels[i], 10)}});
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV: header row required; columns named x* are inputs, y* are labels.

namespace detail {

inline std::vector<std::string> csv_fields(const std::string& line, std::size_t lineno) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) throw Error(ErrorCode::ParseError, "csv line " + std::to_string(lineno) + ": unterminated quote");
  out.push_back(std::move(cur));
  return out;
}

}  // namespace detail

/// Reads a CSV whose header names input columns x... and label columns y....
/// Columns become real vectors, or Z2 bit vectors when `bits` is set.
inline Dataset load_csv(const std::string& path, bool bits = false) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::TruncatedFile, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, path + ": missing header row");
  const auto header = detail::csv_fields(line, 1);
  std::vector<std::size_t> xs, ys;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!header[i].empty() && header[i][0] == 'x') xs.push_back(i);
    else if (!header[i].empty() && header[i][0] == 'y') ys.push_back(i);
    else throw Error(ErrorCode::ParseError, path + ": column '" + header[i] + "' is neither x* nor y*");
  }
  if (xs.empty() || ys.empty()) throw Error(ErrorCode::ParseError, path + ": need at least one x and one y column");
  Dataset out;
  for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
    if (line.empty() || line == "\r") continue;
    const auto f = detail::csv_fields(line, lineno);
    if (f.size() != header.size())
      throw Error(ErrorCode::ParseError, path + ": line " + std::to_string(lineno) + " has " + std::to_string(f.size()) + " fields");
    auto num = [&](std::size_t i) {
      try {
        std::size_t used = 0;
        const double v = std::stod(f[i], &used);
        if (used != f[i].size()) throw std::invalid_argument("trailing");
        return v;
      } catch (const std::exception&) {
        throw Error(ErrorCode::ParseError, path + ": line " + std::to_string(lineno) + ": '" + f[i] + "' is not a number");
      }
    };
    std::vector<double> x, y;
    for (auto i : xs) x.push_back(num(i));
    for (auto i : ys) y.push_back(num(i));
    auto to_bits = [](const std::vector<double>& v) {
      std::vector<std::uint8_t> b;
      for (double d : v) b.push_back(d != 0.0);
      const std::size_t n = b.size();
      return Tensor::bits(Shape{n}, std::move(b));
    };
    Example e;
    if (bits) {
      e.input = {to_bits(x)};
      e.label = {to_bits(y)};
    } else {
      e.input = {Tensor::vector(std::move(x))};
      e.label = {Tensor::vector(std::move(y))};
    }
    out.push_back(std::move(e));
  }
  if (out.empty()) throw Error(ErrorCode::ParseError, path + ": no data rows");
  return out;
}

// ---------------------------------------------------------------------------
// Parameter dump: "PLNS", u32 version, u32 count, then per tensor u8 kind,
// u32 rank, u64 dims; then every element as a little-endian 64-bit word
// (IEEE double for real64, 0 or 1 for z2). All integers little-endian.

constexpr std::uint32_t kParamDumpVersion = 1;

namespace detail {

template <class T>
void put_le(std::vector<unsigned char>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<unsigned char>((std::uint64_t(v) >> (8 * i)) & 0xff));
}

template <class T>
T get_le(const std::vector<unsigned char>& b, std::size_t& off, const std::string& path) {
  if (off + sizeof(T) > b.size()) throw Error(ErrorCode::TruncatedFile, path + ": parameter dump ends early");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= std::uint64_t(b[off + i]) << (8 * i);
  off += sizeof(T);
  return static_cast<T>(v);
}

}  // namespace detail

inline std::vector<unsigned char> encode_params(const Bundle& params) {
  std::vector<unsigned char> out{'P', 'L', 'N', 'S'};
  detail::put_le<std::uint32_t>(out, kParamDumpVersion);
  detail::put_le<std::uint32_t>(out, std::uint32_t(params.size()));
  for (const auto& t : params) {
    detail::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.kind()));
    detail::put_le<std::uint32_t>(out, std::uint32_t(t.shape().rank()));
    for (auto d : t.shape().dims()) detail::put_le<std::uint64_t>(out, d);
  }
  for (const auto& t : params)
    for (std::size_t i = 0; i < t.size(); ++i)
      detail::put_le<std::uint64_t>(out, t.kind() == ScalarKind::Real64 ? std::bit_cast<std::uint64_t>(t.at(i)) : std::uint64_t(t.at(i)));
  return out;
}

inline Bundle decode_params(const std::vector<unsigned char>& b, const std::string& path = "parameter dump") {
  if (b.size() < 4 || std::memcmp(b.data(), "PLNS", 4) != 0) throw Error(ErrorCode::BadMagic, path + ": not a parameter dump");
  std::size_t off = 4;
  const auto version = detail::get_le<std::uint32_t>(b, off, path);
  if (version != kParamDumpVersion) throw Error(ErrorCode::BadMagic, path + ": unsupported version " + std::to_string(version));
  const auto count = detail::get_le<std::uint32_t>(b, off, path);
  std::vector<TensorType> types;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto kind = detail::get_le<std::uint8_t>(b, off, path);
    if (kind > 1) throw Error(ErrorCode::BadMagic, path + ": unknown scalar kind " + std::to_string(kind));
    const auto rank = detail::get_le<std::uint32_t>(b, off, path);
    std::vector<std::size_t> dims;
    for (std::uint32_t r = 0; r < rank; ++r) dims.push_back(detail::get_le<std::uint64_t>(b, off, path));
    types.push_back({Shape(std::move(dims)), static_cast<ScalarKind>(kind)});
  }
  Bundle out;
  for (const auto& t : types) {
    const std::size_t n = t.shape.size();
    if (t.kind == ScalarKind::Real64) {
      std::vector<double> v(n);
      for (auto& x : v) x = std::bit_cast<double>(detail::get_le<std::uint64_t>(b, off, path));
      out.push_back(Tensor::real(t.shape, std::move(v)));
    } else {
      std::vector<std::uint8_t> v(n);
      for (auto& x : v) x = std::uint8_t(detail::get_le<std::uint64_t>(b, off, path) & 1u);
      out.push_back(Tensor::bits(t.shape, std::move(v)));
    }
  }
  if (off != b.size()) throw Error(ErrorCode::CountMismatch, path + ": trailing bytes after the payload");
  return out;
}

inline void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::TruncatedFile, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

inline std::vector<unsigned char> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::TruncatedFile, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void save_params(const std::string& path, const Bundle& params) { write_bytes(path, encode_params(params)); }
inline Bundle load_params(const std::string& path) { return decode_params(read_bytes(path), path); }

// ---------------------------------------------------------------------------
// Metrics.

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  out << "epoch,step,loss,accuracy\n";
  for (const auto& r : rows)
    out << r.epoch << ',' << r.step << ',' << format_double(r.loss) << ',' << (r.accuracy ? format_double(*r.accuracy) : "") << '\n';
  return out.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::TruncatedFile, "cannot write " + path);
  out << text;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::TruncatedFile, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Circuit load_circuit(const std::string& path) { return parse_circuit(read_text(path)); }

}  // namespace paralens
