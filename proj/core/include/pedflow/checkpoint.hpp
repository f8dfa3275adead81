#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace pedflow::io {

/// Flat container of named tensors, written as a little-endian binary file.
///
/// Layout: magic "PFTENS01", u32 entry count, then entries sorted by name:
///   u32 name length, name bytes,
///   u8 dtype (0 = f64, 1 = u64),
///   u64 rows, u64 cols,
///   payload, row-major.
/// u64 entries are one-dimensional (cols = 1). The sort makes the byte
/// stream a pure function of the contents.
class TensorFile {
 public:
  void put(const std::string& name, const Eigen::MatrixXd& value);
  void put_scalar(const std::string& name, double value);
  void put_u64(const std::string& name, const std::vector<std::uint64_t>& value);

  bool contains(const std::string& name) const;
  const Eigen::MatrixXd& get(const std::string& name) const;
  double get_scalar(const std::string& name) const;
  const std::vector<std::uint64_t>& get_u64(const std::string& name) const;

  std::vector<std::string> names() const;

  void write(const std::string& path) const;
  static TensorFile read(const std::string& path);

 private:
  std::map<std::string, Eigen::MatrixXd> f64_;
  std::map<std::string, std::vector<std::uint64_t>> u64_;
};

}  // namespace pedflow::io
