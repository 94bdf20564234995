#include "vemreg/ply.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace vemreg {

namespace {

enum class ScalarType { kInt8, kUInt8, kInt16, kUInt16, kInt32, kUInt32, kFloat32, kFloat64 };

ScalarType parse_type(const std::string& t, const std::string& context) {
  if (t == "char" || t == "int8") return ScalarType::kInt8;
  if (t == "uchar" || t == "uint8") return ScalarType::kUInt8;
  if (t == "short" || t == "int16") return ScalarType::kInt16;
  if (t == "ushort" || t == "uint16") return ScalarType::kUInt16;
  if (t == "int" || t == "int32") return ScalarType::kInt32;
  if (t == "uint" || t == "uint32") return ScalarType::kUInt32;
  if (t == "float" || t == "float32") return ScalarType::kFloat32;
  if (t == "double" || t == "float64") return ScalarType::kFloat64;
  throw FormatError("PLY: unsupported type \"" + t + "\" in " + context);
}

std::size_t type_size(ScalarType t) {
  switch (t) {
    case ScalarType::kInt8:
    case ScalarType::kUInt8:
      return 1;
    case ScalarType::kInt16:
    case ScalarType::kUInt16:
      return 2;
    case ScalarType::kInt32:
    case ScalarType::kUInt32:
    case ScalarType::kFloat32:
      return 4;
    case ScalarType::kFloat64:
      return 8;
  }
  return 0;
}

double read_binary_scalar(std::istream& in, ScalarType t) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(type_size(t)));
  if (!in) throw FormatError("PLY: unexpected end of binary data");
  switch (t) {
    case ScalarType::kInt8:
      return static_cast<double>(static_cast<std::int8_t>(buf[0]));
    case ScalarType::kUInt8:
      return static_cast<double>(buf[0]);
    case ScalarType::kInt16: {
      std::int16_t v;
      std::memcpy(&v, buf, 2);
      return v;
    }
    case ScalarType::kUInt16: {
      std::uint16_t v;
      std::memcpy(&v, buf, 2);
      return v;
    }
    case ScalarType::kInt32: {
      std::int32_t v;
      std::memcpy(&v, buf, 4);
      return v;
    }
    case ScalarType::kUInt32: {
      std::uint32_t v;
      std::memcpy(&v, buf, 4);
      return v;
    }
    case ScalarType::kFloat32: {
      float v;
      std::memcpy(&v, buf, 4);
      return v;
    }
    case ScalarType::kFloat64: {
      double v;
      std::memcpy(&v, buf, 8);
      return v;
    }
  }
  return 0;
}

struct PropertySpec {
  std::string name;
  bool is_list = false;
  ScalarType type = ScalarType::kFloat32;
  ScalarType count_type = ScalarType::kUInt8;
};

struct ElementSpec {
  std::string name;
  std::size_t count = 0;
  std::vector<PropertySpec> props;
};

}  // namespace

PlyData PlyData::read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("PLY: cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw FormatError("PLY: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "ply") throw FormatError("PLY: missing \"ply\" magic in " + path);

  bool binary = false;
  bool format_seen = false;
  std::vector<ElementSpec> specs;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "comment" || word == "obj_info" || word.empty()) continue;
    if (word == "format") {
      std::string fmt, version;
      ls >> fmt >> version;
      if (fmt == "ascii") {
        binary = false;
      } else if (fmt == "binary_little_endian") {
        binary = true;
      } else {
        throw FormatError("PLY: unsupported format \"" + fmt + "\"");
      }
      format_seen = true;
    } else if (word == "element") {
      ElementSpec e;
      ls >> e.name >> e.count;
      if (!ls) throw FormatError("PLY: malformed element line: " + line);
      specs.push_back(e);
    } else if (word == "property") {
      if (specs.empty()) throw FormatError("PLY: property before element");
      std::string t;
      ls >> t;
      PropertySpec p;
      if (t == "list") {
        std::string count_t, item_t;
        ls >> count_t >> item_t >> p.name;
        if (!ls) throw FormatError("PLY: malformed list property: " + line);
        p.is_list = true;
        p.count_type = parse_type(count_t, line);
        p.type = parse_type(item_t, line);
      } else {
        ls >> p.name;
        if (!ls) throw FormatError("PLY: malformed property: " + line);
        p.type = parse_type(t, line);
      }
      specs.back().props.push_back(p);
    } else if (word == "end_header") {
      break;
    } else {
      throw FormatError("PLY: unknown header keyword \"" + word + "\"");
    }
  }
  if (!format_seen) throw FormatError("PLY: missing format line in " + path);

  PlyData data;
  for (const auto& spec : specs) {
    Element elem;
    elem.count = spec.count;
    for (const auto& p : spec.props) {
      if (p.is_list) {
        elem.list_props[p.name].reserve(spec.count);
      } else {
        elem.scalar_names.push_back(p.name);
        elem.scalars[p.name].reserve(spec.count);
      }
    }

    for (std::size_t i = 0; i < spec.count; ++i) {
      if (binary) {
        for (const auto& p : spec.props) {
          if (p.is_list) {
            const auto n = static_cast<std::size_t>(read_binary_scalar(in, p.count_type));
            std::vector<int> items(n);
            for (auto& item : items) {
              item = static_cast<int>(read_binary_scalar(in, p.type));
            }
            elem.list_props[p.name].push_back(std::move(items));
          } else {
            elem.scalars[p.name].push_back(read_binary_scalar(in, p.type));
          }
        }
      } else {
        std::string row;
        do {
          if (!std::getline(in, row)) {
            throw FormatError("PLY: unexpected end of data in element \"" + spec.name + "\"");
          }
        } while (row.find_first_not_of(" \t\r\n") == std::string::npos);
        std::istringstream rs(row);
        for (const auto& p : spec.props) {
          if (p.is_list) {
            std::size_t n;
            if (!(rs >> n)) throw FormatError("PLY: malformed list row: " + row);
            std::vector<int> items(n);
            for (auto& item : items) {
              if (!(rs >> item)) throw FormatError("PLY: malformed list row: " + row);
            }
            elem.list_props[p.name].push_back(std::move(items));
          } else {
            double v;
            if (!(rs >> v)) {
              throw FormatError("PLY: malformed row in element \"" + spec.name + "\": " + row);
            }
            elem.scalars[p.name].push_back(v);
          }
        }
      }
    }
    data.element_order_.push_back(spec.name);
    data.elements_[spec.name] = std::move(elem);
  }
  return data;
}

bool PlyData::has_element(const std::string& element) const {
  return elements_.count(element) != 0;
}

std::size_t PlyData::element_count(const std::string& element) const {
  const auto it = elements_.find(element);
  return it == elements_.end() ? 0 : it->second.count;
}

bool PlyData::has_property(const std::string& element, const std::string& prop) const {
  const auto it = elements_.find(element);
  if (it == elements_.end()) return false;
  return it->second.scalars.count(prop) != 0 || it->second.list_props.count(prop) != 0;
}

const std::vector<double>& PlyData::column(const std::string& element,
                                           const std::string& prop) const {
  const auto it = elements_.find(element);
  if (it == elements_.end()) throw FormatError("PLY: missing element \"" + element + "\"");
  const auto pit = it->second.scalars.find(prop);
  if (pit == it->second.scalars.end()) {
    throw FormatError("PLY: element \"" + element + "\" missing property \"" + prop + "\"");
  }
  return pit->second;
}

const std::vector<std::vector<int>>& PlyData::lists(const std::string& element,
                                                    const std::string& prop) const {
  const auto it = elements_.find(element);
  if (it == elements_.end()) throw FormatError("PLY: missing element \"" + element + "\"");
  const auto pit = it->second.list_props.find(prop);
  if (pit == it->second.list_props.end()) {
    throw FormatError("PLY: element \"" + element + "\" missing list property \"" + prop + "\"");
  }
  return pit->second;
}

}  // namespace vemreg
