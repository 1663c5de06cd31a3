#include "resinv/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "resinv/errors.hpp"

namespace resinv::io {

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint64_t offset() const { return pos_; }
  void need(std::size_t n, const char* what) {
    if (in_.size() - pos_ < n) throw FormatError(std::string("truncated RTF file while reading ") + what, pos_);
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return in_[pos_++];
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = static_cast<std::uint16_t>(in_[pos_] | (in_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void write_name(Writer& w, const std::string& name) {
  require(name.size() <= 0xFFFF, "RTF entry name too long: " + name.substr(0, 32));
  w.u16(static_cast<std::uint16_t>(name.size()));
  w.bytes(name.data(), name.size());
}

}  // namespace

std::vector<std::uint8_t> encode_rtf(const RtfFile& file) {
  std::set<std::string> names;
  for (const auto& [name, t] : file.tensors) {
    require(name != kHeaderEntry, "RTF entry name __header__ is reserved");
    require(names.insert(name).second, "duplicate RTF entry name " + name);
    require(t.ndim() <= 255, "RTF tensors support at most 255 dims");
  }
  Writer w;
  w.bytes("RTEN", 4);
  w.u16(kRtfVersion);
  w.u32(static_cast<std::uint32_t>(file.tensors.size() + (file.header ? 1 : 0)));
  if (file.header) {
    write_name(w, kHeaderEntry);
    w.u8(kDtypeBytes);
    w.u8(1);
    w.u32(static_cast<std::uint32_t>(file.header->size()));
    w.bytes(file.header->data(), file.header->size());
  }
  for (const auto& [name, t] : file.tensors) {
    write_name(w, name);
    w.u8(kDtypeF64);
    w.u8(static_cast<std::uint8_t>(t.ndim()));
    for (std::size_t d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : t.data()) w.f64(v);
  }
  return w.take();
}

RtfFile decode_rtf(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.str(4, "magic") != "RTEN") throw FormatError("bad RTF magic", 0);
  const std::uint64_t version_at = r.offset();
  if (const auto v = r.u16("version"); v != kRtfVersion)
    throw FormatError("unsupported RTF version " + std::to_string(v), version_at);
  const std::uint32_t count = r.u32("entry count");
  RtfFile file;
  std::set<std::string> names;
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::uint64_t entry_at = r.offset();
    const std::string name = r.str(r.u16("name length"), "name");
    if (!names.insert(name).second) throw FormatError("duplicate RTF entry name " + name, entry_at);
    const std::uint64_t dtype_at = r.offset();
    const std::uint8_t dtype = r.u8("dtype");
    const std::uint8_t ndim = r.u8("ndim");
    Shape shape;
    for (int d = 0; d < ndim; ++d) shape.push_back(r.u32("dims"));
    for (std::size_t d : shape)
      if (d == 0) throw FormatError("zero extent in RTF entry " + name, dtype_at);
    const std::size_t n = shape_numel(shape);
    if (dtype == kDtypeBytes) {
      if (ndim != 1) throw FormatError("byte entries must be 1-D", dtype_at);
      std::string blob = r.str(n, "byte payload");
      if (name == kHeaderEntry) file.header = std::move(blob);
      continue;
    }
    if (dtype != kDtypeF64) throw FormatError("unknown RTF dtype " + std::to_string(dtype), dtype_at);
    if (n > (std::size_t{1} << 40)) throw FormatError("implausible RTF entry size", dtype_at);
    r.need(n * 8, "f64 payload");
    std::vector<double> data(n);
    for (double& v : data) v = r.f64();
    try {
      file.tensors.emplace_back(name, Tensor::from(std::move(shape), std::move(data)));
    } catch (const ContractViolation& ex) {
      throw FormatError(std::string("invalid tensor payload: ") + ex.what(), entry_at);
    }
  }
  if (!r.done()) throw FormatError("trailing bytes after last RTF entry", r.offset());
  return file;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const std::filesystem::path& path) {
  const auto b = read_bytes(path);
  return std::string(b.begin(), b.end());
}

void write_rtf(const std::filesystem::path& path, const RtfFile& file) { write_bytes(path, encode_rtf(file)); }
RtfFile read_rtf(const std::filesystem::path& path) { return decode_rtf(read_bytes(path)); }

std::vector<std::uint8_t> encode_pgm(const Tensor& image, DynamicRange range) {
  require(image.ndim() == 2, "write_pgm: expected [H,W] image, got " + shape_str(image.shape()));
  require(range.hi > range.lo, "write_pgm: dynamic range must have hi > lo");
  const std::string header =
      "P5\n" + std::to_string(image.dim(1)) + " " + std::to_string(image.dim(0)) + "\n65535\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + image.numel() * 2);
  const double scale = 65535.0 / (range.hi - range.lo);
  for (double v : image.data()) {
    const double q = std::clamp(std::round((v - range.lo) * scale), 0.0, 65535.0);
    const auto u = static_cast<std::uint16_t>(q);
    out.push_back(static_cast<std::uint8_t>(u >> 8));
    out.push_back(static_cast<std::uint8_t>(u & 0xFF));
  }
  return out;
}

Tensor decode_pgm(std::span<const std::uint8_t> bytes, DynamicRange range) {
  require(range.hi > range.lo, "read_pgm: dynamic range must have hi > lo");
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&](const char* what) -> long {
    skip_space();
    const std::size_t start = pos;
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > 1'000'000'000) throw FormatError(std::string("PGM ") + what + " too large", start);
      ++pos;
    }
    if (pos == start) throw FormatError(std::string("malformed PGM header: expected ") + what, start);
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw FormatError("not a binary PGM (P5) file", 0);
  pos = 2;
  const long width = number("width");
  const long height = number("height");
  const std::size_t maxval_at = pos;
  const long maxval = number("maxval");
  if (width < 1 || height < 1) throw FormatError("PGM dimensions must be positive", maxval_at);
  if (maxval < 1 || maxval > 65535) throw FormatError("PGM maxval out of range", maxval_at);
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError("malformed PGM header after maxval", pos);
  ++pos;
  const std::size_t bps = maxval > 255 ? 2 : 1;
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() - pos < n * bps) throw FormatError("truncated PGM pixel data", pos);
  std::vector<double> px(n);
  const double scale = (range.hi - range.lo) / static_cast<double>(maxval);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned q = bps == 2 ? (bytes[pos + 2 * i] << 8) | bytes[pos + 2 * i + 1] : bytes[pos + i];
    px[i] = range.lo + q * scale;
  }
  return Tensor::from({static_cast<std::size_t>(height), static_cast<std::size_t>(width)}, std::move(px));
}

void write_pgm(const std::filesystem::path& path, const Tensor& image, DynamicRange range) {
  write_bytes(path, encode_pgm(image, range));
}

Tensor read_pgm(const std::filesystem::path& path, DynamicRange range) { return decode_pgm(read_bytes(path), range); }

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) { row(header); }

void CsvWriter::row(const std::vector<std::string>& cells) {
  require(cells.size() == columns_, "CSV row has " + std::to_string(cells.size()) + " cells, header has " +
                                        std::to_string(columns_));
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) text_ += ',';
    text_ += cells[i];
  }
  text_ += '\n';
}

void CsvWriter::row(const std::vector<double>& cells) {
  std::vector<std::string> s;
  for (double v : cells) s.push_back(format_double(v));
  row(s);
}

void CsvWriter::save(const std::filesystem::path& path) const { write_text(path, text_); }

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::string gamma_table_csv(const GammaTable& table) {
  CsvWriter w({"factor", "gamma"});
  for (const auto& e : table.entries) w.row(std::vector<double>{e.factor, e.gamma});
  return w.text();
}

GammaTable parse_gamma_table(const std::string& text, Spacing reference_res) {
  const auto rows = parse_csv(text);
  if (rows.empty() || rows[0] != std::vector<std::string>{"factor", "gamma"})
    throw FormatError("gamma table CSV must start with header factor,gamma");
  GammaTable t;
  t.reference_res = reference_res;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 2) throw FormatError("gamma table row " + std::to_string(i) + " must have 2 cells");
    try {
      const double g = std::stod(rows[i][1]);
      t.entries.push_back({std::stod(rows[i][0]), g, g});
    } catch (const std::exception&) {
      throw FormatError("gamma table row " + std::to_string(i) + " is not numeric");
    }
    if (i > 1 && !(t.entries[i - 1].factor > t.entries[i - 2].factor))
      throw FormatError("gamma table factors must be strictly increasing");
  }
  if (t.entries.empty()) throw FormatError("gamma table has no rows");
  return t;
}

}  // namespace resinv::io
