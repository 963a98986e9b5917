#include "canopy/pcio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "canopy/error.hpp"
#include "text_format.hpp"

namespace canopy::pcio {

namespace {

static_assert(std::endian::native == std::endian::little,
              "binary PLY I/O assumes a little-endian host");

using detail::LineReader;
using detail::split;
using detail::trim;

enum class ScalarType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

std::optional<ScalarType> scalar_type(std::string_view name) {
  if (name == "char" || name == "int8") return ScalarType::Int8;
  if (name == "uchar" || name == "uint8") return ScalarType::UInt8;
  if (name == "short" || name == "int16") return ScalarType::Int16;
  if (name == "ushort" || name == "uint16") return ScalarType::UInt16;
  if (name == "int" || name == "int32") return ScalarType::Int32;
  if (name == "uint" || name == "uint32") return ScalarType::UInt32;
  if (name == "float" || name == "float32") return ScalarType::Float32;
  if (name == "double" || name == "float64") return ScalarType::Float64;
  return std::nullopt;
}

std::size_t scalar_size(ScalarType t) {
  switch (t) {
    case ScalarType::Int8:
    case ScalarType::UInt8: return 1;
    case ScalarType::Int16:
    case ScalarType::UInt16: return 2;
    case ScalarType::Int32:
    case ScalarType::UInt32:
    case ScalarType::Float32: return 4;
    case ScalarType::Float64: return 8;
  }
  return 0;
}

bool is_integral(ScalarType t) { return t != ScalarType::Float32 && t != ScalarType::Float64; }

template <typename T>
T load(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

double load_scalar(ScalarType t, const char* p) {
  switch (t) {
    case ScalarType::Int8: return load<std::int8_t>(p);
    case ScalarType::UInt8: return load<std::uint8_t>(p);
    case ScalarType::Int16: return load<std::int16_t>(p);
    case ScalarType::UInt16: return load<std::uint16_t>(p);
    case ScalarType::Int32: return load<std::int32_t>(p);
    case ScalarType::UInt32: return load<std::uint32_t>(p);
    case ScalarType::Float32: return load<float>(p);
    case ScalarType::Float64: return load<double>(p);
  }
  return 0.0;
}

struct Property {
  std::string name;
  ScalarType type = ScalarType::Float32;
  bool is_list = false;
  ScalarType count_type = ScalarType::UInt8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
};

enum class PlyFormat { Ascii, BinaryLittleEndian };

struct Header {
  PlyFormat format = PlyFormat::Ascii;
  std::vector<Element> elements;
  std::string source_id;
  std::optional<int> capture_week;
  std::size_t body_offset = 0;
  std::size_t body_first_line = 0;
};

[[noreturn]] void parse_fail(const std::filesystem::path& path, std::size_t line, const std::string& what) {
  throw Error(ErrorKind::Parse,
              path.string() + ":" + std::to_string(line) + ": malformed PLY header: " + what);
}

Header parse_header(std::string_view data, const std::filesystem::path& path) {
  Header header;
  LineReader reader(data);
  std::string_view line;
  if (!reader.next(line) || trim(line) != "ply") parse_fail(path, 1, "missing 'ply' magic");

  bool have_format = false;
  while (true) {
    if (!reader.next(line)) parse_fail(path, reader.line_number() + 1, "missing end_header");
    const std::size_t lineno = reader.line_number();
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string_view> tok;
    for (auto t : split(line, ' '))
      if (!t.empty()) tok.push_back(t);
    const auto keyword = tok.front();

    if (keyword == "end_header") {
      header.body_offset = reader.offset();
      header.body_first_line = lineno + 1;
      break;
    }
    if (keyword == "comment") {
      if (tok.size() >= 3 && tok[1] == "source_id") {
        header.source_id = std::string(trim(line.substr(line.find("source_id") + 9)));
      } else if (tok.size() == 3 && tok[1] == "capture_week") {
        auto week = detail::parse_int(tok[2]);
        if (!week) parse_fail(path, lineno, "bad capture_week comment");
        header.capture_week = static_cast<int>(*week);
      }
      continue;
    }
    if (keyword == "obj_info") continue;
    if (keyword == "format") {
      if (tok.size() != 3) parse_fail(path, lineno, "format line needs 2 fields");
      if (tok[2] != "1.0") parse_fail(path, lineno, "unsupported PLY version " + std::string(tok[2]));
      if (tok[1] == "ascii") {
        header.format = PlyFormat::Ascii;
      } else if (tok[1] == "binary_little_endian") {
        header.format = PlyFormat::BinaryLittleEndian;
      } else if (tok[1] == "binary_big_endian") {
        throw Error(ErrorKind::Format, path.string() + ": big-endian PLY is not supported");
      } else {
        parse_fail(path, lineno, "unknown format '" + std::string(tok[1]) + "'");
      }
      have_format = true;
      continue;
    }
    if (keyword == "element") {
      if (tok.size() != 3) parse_fail(path, lineno, "element line needs name and count");
      auto count = detail::parse_int(tok[2]);
      if (!count || *count < 0) parse_fail(path, lineno, "bad element count");
      header.elements.push_back({std::string(tok[1]), static_cast<std::size_t>(*count), {}});
      continue;
    }
    if (keyword == "property") {
      if (header.elements.empty()) parse_fail(path, lineno, "property before any element");
      Property prop;
      if (tok.size() == 5 && tok[1] == "list") {
        auto ct = scalar_type(tok[2]);
        auto it = scalar_type(tok[3]);
        if (!ct || !it || !is_integral(*ct)) parse_fail(path, lineno, "bad list property types");
        prop.is_list = true;
        prop.count_type = *ct;
        prop.type = *it;
        prop.name = std::string(tok[4]);
      } else if (tok.size() == 3) {
        auto t = scalar_type(tok[1]);
        if (!t) parse_fail(path, lineno, "unknown property type '" + std::string(tok[1]) + "'");
        prop.type = *t;
        prop.name = std::string(tok[2]);
      } else {
        parse_fail(path, lineno, "bad property line");
      }
      header.elements.back().properties.push_back(std::move(prop));
      continue;
    }
    parse_fail(path, lineno, "unknown keyword '" + std::string(keyword) + "'");
  }
  if (!have_format) parse_fail(path, 2, "missing format line");
  return header;
}

struct VertexLayout {
  std::size_t element_index = 0;
  int xyz[3] = {-1, -1, -1};
  int rgb[3] = {-1, -1, -1};
};

VertexLayout locate_vertex(const Header& header, const std::filesystem::path& path) {
  VertexLayout layout;
  auto it = std::find_if(header.elements.begin(), header.elements.end(),
                         [](const Element& e) { return e.name == "vertex"; });
  if (it == header.elements.end())
    throw Error(ErrorKind::Format, path.string() + ": PLY has no vertex element");
  layout.element_index = static_cast<std::size_t>(it - header.elements.begin());
  static constexpr const char* kXyz[3] = {"x", "y", "z"};
  static constexpr const char* kRgb[3] = {"red", "green", "blue"};
  for (std::size_t i = 0; i < it->properties.size(); ++i) {
    const auto& prop = it->properties[i];
    for (int c = 0; c < 3; ++c) {
      if (prop.name == kXyz[c]) layout.xyz[c] = static_cast<int>(i);
      if (prop.name == kRgb[c]) layout.rgb[c] = static_cast<int>(i);
    }
  }
  for (int c = 0; c < 3; ++c) {
    if (layout.xyz[c] < 0)
      throw Error(ErrorKind::Format, path.string() + ": vertex element lacks property " + kXyz[c]);
    if (layout.rgb[c] < 0)
      throw Error(ErrorKind::Format, path.string() + ": vertex element lacks property " + kRgb[c]);
    for (int idx : {layout.xyz[c], layout.rgb[c]}) {
      if (it->properties[static_cast<std::size_t>(idx)].is_list)
        throw Error(ErrorKind::Format, path.string() + ": coordinate/color property is a list");
    }
    if (!is_integral(it->properties[static_cast<std::size_t>(layout.rgb[c])].type))
      throw Error(ErrorKind::Format, path.string() + ": color property " + kRgb[c] + " must be an 8-bit integer");
  }
  return layout;
}

Point make_point(const double* values, const VertexLayout& layout, const std::filesystem::path& path,
                 std::size_t vertex) {
  Point p;
  float* coords[3] = {&p.x, &p.y, &p.z};
  std::uint8_t* colors[3] = {&p.r, &p.g, &p.b};
  for (int c = 0; c < 3; ++c) {
    const double v = values[layout.xyz[c]];
    if (!std::isfinite(v))
      throw Error(ErrorKind::Format, path.string() + ": vertex " + std::to_string(vertex) + " has a non-finite coordinate");
    *coords[c] = static_cast<float>(v);
    const double col = values[layout.rgb[c]];
    if (col < 0.0 || col > 255.0 || col != std::floor(col))
      throw Error(ErrorKind::Format, path.string() + ": vertex " + std::to_string(vertex) + " color out of 0-255");
    *colors[c] = static_cast<std::uint8_t>(col);
  }
  return p;
}

void read_binary_body(std::string_view data, const Header& header, const VertexLayout& layout,
                      const std::filesystem::path& path, ColoredPointCloud& cloud) {
  std::size_t pos = header.body_offset;
  auto need = [&](std::size_t n) {
    if (pos + n > data.size())
      throw Error(ErrorKind::Format, path.string() + ": truncated binary PLY body");
  };
  for (std::size_t e = 0; e < header.elements.size(); ++e) {
    const auto& element = header.elements[e];
    const bool is_vertex = e == layout.element_index;
    std::vector<double> values(element.properties.size(), 0.0);
    if (is_vertex) cloud.points.reserve(element.count);
    for (std::size_t i = 0; i < element.count; ++i) {
      for (std::size_t k = 0; k < element.properties.size(); ++k) {
        const auto& prop = element.properties[k];
        if (prop.is_list) {
          const auto cs = scalar_size(prop.count_type);
          need(cs);
          const double n = load_scalar(prop.count_type, data.data() + pos);
          pos += cs;
          if (n < 0) throw Error(ErrorKind::Format, path.string() + ": negative list length");
          const auto bytes = static_cast<std::size_t>(n) * scalar_size(prop.type);
          need(bytes);
          pos += bytes;
        } else {
          const auto sz = scalar_size(prop.type);
          need(sz);
          values[k] = load_scalar(prop.type, data.data() + pos);
          pos += sz;
        }
      }
      if (is_vertex) cloud.points.push_back(make_point(values.data(), layout, path, i));
    }
    if (is_vertex) return;
  }
}

void read_ascii_body(std::string_view data, const Header& header, const VertexLayout& layout,
                     const std::filesystem::path& path, ColoredPointCloud& cloud) {
  LineReader reader(data.substr(header.body_offset));
  std::string_view line;
  for (std::size_t e = 0; e < header.elements.size(); ++e) {
    const auto& element = header.elements[e];
    const bool is_vertex = e == layout.element_index;
    std::vector<double> values(element.properties.size(), 0.0);
    if (is_vertex) cloud.points.reserve(element.count);
    for (std::size_t i = 0; i < element.count; ++i) {
      do {
        if (!reader.next(line))
          throw Error(ErrorKind::Format, path.string() + ": ASCII PLY body ends early in element '" + element.name + "'");
        line = trim(line);
      } while (line.empty());
      const std::size_t lineno = header.body_first_line + reader.line_number() - 1;
      std::vector<std::string_view> tok;
      for (auto t : split(line, ' '))
        if (!t.empty()) tok.push_back(t);
      std::size_t t = 0;
      auto next_value = [&]() -> double {
        if (t >= tok.size())
          throw Error(ErrorKind::Format, path.string() + ":" + std::to_string(lineno) + ": too few values");
        auto v = detail::parse_double(tok[t++]);
        if (!v) throw Error(ErrorKind::Format, path.string() + ":" + std::to_string(lineno) + ": bad number");
        return *v;
      };
      for (std::size_t k = 0; k < element.properties.size(); ++k) {
        const auto& prop = element.properties[k];
        if (prop.is_list) {
          const double n = next_value();
          for (long long j = 0; j < static_cast<long long>(n); ++j) next_value();
        } else {
          values[k] = next_value();
        }
      }
      if (is_vertex) cloud.points.push_back(make_point(values.data(), layout, path, i));
    }
    if (is_vertex) return;
  }
}

double require_number(const nlohmann::json& j, const char* key, const std::string& ctx) {
  if (!j.at(key).is_number()) throw Error(ErrorKind::Validation, ctx + ": " + key + " must be a number");
  return j.at(key).get<double>();
}

std::optional<double> optional_number(const nlohmann::json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return require_number(j, key, ctx);
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorKind::Io, "read failure on " + path.string());
  return std::move(ss).str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw Error(ErrorKind::Io, "write failure on " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorKind::Io, "cannot rename " + tmp.string() + " to " + path.string());
  }
}

ColoredPointCloud read_cloud(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  const Header header = parse_header(data, path);
  const VertexLayout layout = locate_vertex(header, path);

  ColoredPointCloud cloud;
  cloud.source_id = header.source_id.empty() ? path.stem().string() : header.source_id;
  cloud.capture_week = header.capture_week.value_or(1);
  if (header.format == PlyFormat::BinaryLittleEndian) {
    read_binary_body(data, header, layout, path, cloud);
  } else {
    read_ascii_body(data, header, layout, path, cloud);
  }
  return cloud;
}

void write_cloud(const ColoredPointCloud& cloud, const std::filesystem::path& path) {
  std::string source_id = cloud.source_id;
  std::replace_if(source_id.begin(), source_id.end(), [](char c) { return c == '\n' || c == '\r'; }, ' ');

  std::string out;
  out.reserve(256 + cloud.size() * 15);
  out += "ply\nformat binary_little_endian 1.0\n";
  if (!trim(source_id).empty()) out += "comment source_id " + std::string(trim(source_id)) + "\n";
  out += "comment capture_week " + std::to_string(cloud.capture_week) + "\n";
  out += "element vertex " + std::to_string(cloud.size()) + "\n";
  out += "property float x\nproperty float y\nproperty float z\n";
  out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out += "end_header\n";
  for (const auto& p : cloud.points) {
    char rec[15];
    std::memcpy(rec, &p.x, 4);
    std::memcpy(rec + 4, &p.y, 4);
    std::memcpy(rec + 8, &p.z, 4);
    rec[12] = static_cast<char>(p.r);
    rec[13] = static_cast<char>(p.g);
    rec[14] = static_cast<char>(p.b);
    out.append(rec, sizeof(rec));
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error(ErrorKind::Io, "write failure on " + path.string());
}

// ---------------------------------------------------------------------------
// Manifest

const ManifestEntry* TreeManifest::find(std::string_view tree_id) const {
  for (const auto& e : entries)
    if (e.tree_id == tree_id) return &e;
  return nullptr;
}

void validate(const TreeManifest& manifest) {
  std::set<std::string> seen;
  for (const auto& e : manifest.entries) {
    if (e.tree_id.empty()) throw Error(ErrorKind::Validation, "manifest entry with empty tree_id");
    if (!seen.insert(e.tree_id).second)
      throw Error(ErrorKind::Validation, "duplicate tree_id '" + e.tree_id + "' in manifest");
    if (e.leaf_N_percent && !(*e.leaf_N_percent > 0.0 && *e.leaf_N_percent < 10.0))
      throw Error(ErrorKind::Validation, "tree '" + e.tree_id + "': leaf_N_percent must lie in (0, 10)");
    const auto& my = e.ground_truth_yellow_mass_g;
    const auto& mg = e.ground_truth_green_mass_g;
    if ((my && !(*my >= 0.0)) || (mg && !(*mg >= 0.0)))
      throw Error(ErrorKind::Validation, "tree '" + e.tree_id + "': ground-truth masses must be nonnegative");
    if (my && mg && *my == 0.0 && *mg == 0.0)
      throw Error(ErrorKind::Validation, "tree '" + e.tree_id + "': ground-truth masses are both zero");
    for (const auto& [week, path] : e.clouds) {
      if (week < 1) throw Error(ErrorKind::Validation, "tree '" + e.tree_id + "': week index must be >= 1");
    }
  }
}

TreeManifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::Parse, std::string("manifest: ") + e.what());
  }
  TreeManifest manifest;
  try {
    if (doc.contains("season")) {
      const auto& s = doc.at("season");
      manifest.season = s.is_string() ? s.get<std::string>() : s.dump();
    }
    for (const auto& t : doc.at("trees")) {
      ManifestEntry e;
      e.tree_id = t.at("tree_id").get<std::string>();
      const std::string ctx = "manifest tree '" + e.tree_id + "'";
      e.row = t.value("row", 0);
      e.position_in_row = t.value("position_in_row", 0);
      if (t.contains("clouds")) {
        for (const auto& [week, file] : t.at("clouds").items()) {
          auto w = detail::parse_int(week);
          if (!w) throw Error(ErrorKind::Validation, ctx + ": cloud key '" + week + "' is not a week number");
          std::filesystem::path p = file.get<std::string>();
          if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
          e.clouds.emplace(static_cast<int>(*w), p);
        }
      }
      e.leaf_N_percent = optional_number(t, "leaf_N_percent", ctx);
      e.ground_truth_yellow_mass_g = optional_number(t, "ground_truth_yellow_mass_g", ctx);
      e.ground_truth_green_mass_g = optional_number(t, "ground_truth_green_mass_g", ctx);
      manifest.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Validation, std::string("manifest: ") + e.what());
  }
  validate(manifest);
  return manifest;
}

TreeManifest read_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_file(path), path.parent_path());
}

void write_manifest(const TreeManifest& manifest, const std::filesystem::path& path) {
  validate(manifest);
  const auto base = path.parent_path();
  nlohmann::ordered_json doc;
  doc["season"] = manifest.season;
  doc["trees"] = nlohmann::ordered_json::array();
  for (const auto& e : manifest.entries) {
    nlohmann::ordered_json t;
    t["tree_id"] = e.tree_id;
    t["row"] = e.row;
    t["position_in_row"] = e.position_in_row;
    nlohmann::ordered_json clouds = nlohmann::ordered_json::object();
    for (const auto& [week, p] : e.clouds) {
      auto rel = base.empty() ? p : p.lexically_relative(base);
      if (rel.empty() || *rel.begin() == "..") rel = p;
      clouds[std::to_string(week)] = rel.generic_string();
    }
    t["clouds"] = std::move(clouds);
    if (e.leaf_N_percent) t["leaf_N_percent"] = *e.leaf_N_percent;
    if (e.ground_truth_yellow_mass_g) t["ground_truth_yellow_mass_g"] = *e.ground_truth_yellow_mass_g;
    if (e.ground_truth_green_mass_g) t["ground_truth_green_mass_g"] = *e.ground_truth_green_mass_g;
    doc["trees"].push_back(std::move(t));
  }
  write_file_atomic(path, doc.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Label dataset

std::string format_label_row(const LabeledPointRecord& row) {
  using detail::format_double;
  std::string line;
  line += to_string(row.label);
  line += ',' + format_double(row.a_star);
  line += ',' + format_double(row.b_star);
  line += ',' + std::to_string(row.r);
  line += ',' + std::to_string(row.g);
  line += ',' + std::to_string(row.b);
  for (double v : row.eigenvalues) line += ',' + format_double(v);
  for (const auto& vec : row.eigenvectors)
    for (double v : vec) line += ',' + format_double(v);
  return line;
}

std::string format_label_dataset(const LabelDataset& dataset) {
  std::string out(kLabelDatasetHeader);
  out += '\n';
  for (const auto& row : dataset.rows) {
    out += format_label_row(row);
    out += '\n';
  }
  return out;
}

LabelDataset parse_label_dataset(std::string_view text) {
  LineReader reader(text);
  std::string_view line;
  if (!reader.next(line) || trim(line) != kLabelDatasetHeader)
    throw Error(ErrorKind::Parse, "label dataset: line 1: header must be exactly '" + std::string(kLabelDatasetHeader) + "'");
  constexpr std::size_t kColumns = 18;
  LabelDataset ds;
  while (reader.next(line)) {
    if (trim(line).empty()) continue;
    const auto where = "label dataset: line " + std::to_string(reader.line_number()) + ": ";
    const auto cells = split(line, ',');
    if (cells.size() != kColumns)
      throw Error(ErrorKind::Validation, where + "expected " + std::to_string(kColumns) + " columns, got " +
                                             std::to_string(cells.size()));
    LabeledPointRecord rec;
    const auto label = parse_label(trim(cells[0]));
    if (label == Label::Unassigned) throw Error(ErrorKind::Validation, where + "label must be Green, Yellow or Trunk");
    rec.label = label;
    auto num = [&](std::size_t i) {
      auto v = detail::parse_double(cells[i]);
      if (!v) throw Error(ErrorKind::Parse, where + "column " + std::to_string(i + 1) + " is not a number");
      return *v;
    };
    auto channel = [&](std::size_t i) {
      auto v = detail::parse_int(cells[i]);
      if (!v || *v < 0 || *v > 255)
        throw Error(ErrorKind::Validation, where + "column " + std::to_string(i + 1) + " is not a 0-255 integer");
      return static_cast<std::uint8_t>(*v);
    };
    rec.a_star = num(1);
    rec.b_star = num(2);
    rec.r = channel(3);
    rec.g = channel(4);
    rec.b = channel(5);
    for (std::size_t i = 0; i < 3; ++i) rec.eigenvalues[i] = num(6 + i);
    for (std::size_t v = 0; v < 3; ++v)
      for (std::size_t c = 0; c < 3; ++c) rec.eigenvectors[v][c] = num(9 + 3 * v + c);
    ds.rows.push_back(rec);
  }
  return ds;
}

LabelDataset read_label_dataset(const std::filesystem::path& path) {
  try {
    return parse_label_dataset(read_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Io) throw;
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void write_label_dataset(const LabelDataset& dataset, const std::filesystem::path& path) {
  for (const auto& row : dataset.rows) {
    if (row.label == Label::Unassigned)
      throw Error(ErrorKind::Validation, "label dataset rows must be Green, Yellow or Trunk");
  }
  write_file_atomic(path, format_label_dataset(dataset));
}

}  // namespace canopy::pcio
