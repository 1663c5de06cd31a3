#pragma once

// File formats: RTF raw tensor container, 16-bit binary PGM, CSV.
//
// RTF layout (all integers little-endian):
//   "RTEN" | u16 version=1 | u32 entry count
//   per entry: u16 name length | UTF-8 name | u8 dtype | u8 ndim | u32 dims[ndim] | payload
// dtype 1 is f64 (8 bytes per element). dtype 2 is raw bytes (ndim 1) and
// carries the JSON config header under the reserved name "__header__".

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "resinv/metrics.hpp"
#include "resinv/model.hpp"
#include "resinv/tensor.hpp"

namespace resinv::io {

inline constexpr std::uint16_t kRtfVersion = 1;
inline constexpr std::uint8_t kDtypeF64 = 1;
inline constexpr std::uint8_t kDtypeBytes = 2;
inline constexpr const char* kHeaderEntry = "__header__";

struct RtfFile {
  NamedTensors tensors;
  std::optional<std::string> header;
};

std::vector<std::uint8_t> encode_rtf(const RtfFile& file);
RtfFile decode_rtf(std::span<const std::uint8_t> bytes);
void write_rtf(const std::filesystem::path& path, const RtfFile& file);
RtfFile read_rtf(const std::filesystem::path& path);

/// Linear map of [lo, hi] onto 0..65535, rounded and clamped.
struct DynamicRange {
  double lo = 0.0;
  double hi = 1.0;
};

std::vector<std::uint8_t> encode_pgm(const Tensor& image, DynamicRange range);
/// Accepts P5 with maxval up to 65535; '#' comments are skipped.
Tensor decode_pgm(std::span<const std::uint8_t> bytes, DynamicRange range);
void write_pgm(const std::filesystem::path& path, const Tensor& image, DynamicRange range);
Tensor read_pgm(const std::filesystem::path& path, DynamicRange range);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Shortest round-trip decimal form.
std::string format_double(double v);

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  void row(const std::vector<std::string>& cells);
  void row(const std::vector<double>& cells);
  const std::string& text() const { return text_; }
  void save(const std::filesystem::path& path) const;

 private:
  std::size_t columns_;
  std::string text_;
};

/// Header row then data rows, split on commas (no quoting).
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

std::string gamma_table_csv(const GammaTable& table);
GammaTable parse_gamma_table(const std::string& text, Spacing reference_res);

}  // namespace resinv::io
