#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace vemreg {

// File format violation; the message names the offending field.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Minimal PLY reader: ascii and binary_little_endian, scalar properties and
// integer list properties. Scalars are widened to double (float32/int32 are
// exact in double).
class PlyData {
 public:
  static PlyData read(const std::string& path);

  bool has_element(const std::string& element) const;
  std::size_t element_count(const std::string& element) const;
  bool has_property(const std::string& element, const std::string& prop) const;

  // Scalar column; throws FormatError when missing.
  const std::vector<double>& column(const std::string& element, const std::string& prop) const;
  // List column (e.g. face vertex indices); throws FormatError when missing.
  const std::vector<std::vector<int>>& lists(const std::string& element,
                                             const std::string& prop) const;

 private:
  struct Element {
    std::size_t count = 0;
    std::vector<std::string> scalar_names;
    std::map<std::string, std::vector<double>> scalars;
    std::map<std::string, std::vector<std::vector<int>>> list_props;
  };
  std::map<std::string, Element> elements_;
  std::vector<std::string> element_order_;
};

}  // namespace vemreg
