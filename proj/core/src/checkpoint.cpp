#include "pedflow/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace pedflow::io {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'P', 'F', 'T', 'E', 'N', 'S', '0', '1'};

template <typename T>
void write_pod(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("tensor file: truncated");
  return value;
}

}  // namespace

void TensorFile::put(const std::string& name, const Eigen::MatrixXd& value) {
  u64_.erase(name);
  f64_[name] = value;
}

void TensorFile::put_scalar(const std::string& name, double value) {
  Eigen::MatrixXd m(1, 1);
  m(0, 0) = value;
  put(name, m);
}

void TensorFile::put_u64(const std::string& name,
                         const std::vector<std::uint64_t>& value) {
  f64_.erase(name);
  u64_[name] = value;
}

bool TensorFile::contains(const std::string& name) const {
  return f64_.count(name) > 0 || u64_.count(name) > 0;
}

const Eigen::MatrixXd& TensorFile::get(const std::string& name) const {
  const auto it = f64_.find(name);
  if (it == f64_.end()) throw std::out_of_range("tensor file: missing f64 entry " + name);
  return it->second;
}

double TensorFile::get_scalar(const std::string& name) const {
  const Eigen::MatrixXd& m = get(name);
  if (m.rows() != 1 || m.cols() != 1)
    throw std::out_of_range("tensor file: entry " + name + " is not a scalar");
  return m(0, 0);
}

const std::vector<std::uint64_t>& TensorFile::get_u64(const std::string& name) const {
  const auto it = u64_.find(name);
  if (it == u64_.end()) throw std::out_of_range("tensor file: missing u64 entry " + name);
  return it->second;
}

std::vector<std::string> TensorFile::names() const {
  std::vector<std::string> all;
  for (const auto& [name, value] : f64_) all.push_back(name);
  for (const auto& [name, value] : u64_) all.push_back(name);
  return all;
}

void TensorFile::write(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("tensor file: cannot open for write: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(f64_.size() + u64_.size()));

  // both maps are sorted; merge them to keep global name order
  auto fit = f64_.begin();
  auto uit = u64_.begin();
  while (fit != f64_.end() || uit != u64_.end()) {
    const bool take_f =
        uit == u64_.end() || (fit != f64_.end() && fit->first < uit->first);
    const std::string& name = take_f ? fit->first : uit->first;
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    if (take_f) {
      const Eigen::MatrixXd& m = fit->second;
      write_pod<std::uint8_t>(out, 0);
      write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
      write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) write_pod<double>(out, m(r, c));
      ++fit;
    } else {
      const std::vector<std::uint64_t>& v = uit->second;
      write_pod<std::uint8_t>(out, 1);
      write_pod<std::uint64_t>(out, v.size());
      write_pod<std::uint64_t>(out, 1);
      for (std::uint64_t x : v) write_pod<std::uint64_t>(out, x);
      ++uit;
    }
  }
  if (!out) throw std::runtime_error("tensor file: write failed: " + path);
}

TensorFile TensorFile::read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("tensor file: cannot open: " + path);

  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("tensor file: bad magic in " + path);

  TensorFile file;
  const auto count = read_pod<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw std::runtime_error("tensor file: truncated");
    const auto dtype = read_pod<std::uint8_t>(in);
    const auto rows = read_pod<std::uint64_t>(in);
    const auto cols = read_pod<std::uint64_t>(in);
    if (dtype == 0) {
      Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = read_pod<double>(in);
      file.f64_[name] = std::move(m);
    } else if (dtype == 1) {
      if (cols != 1) throw std::runtime_error("tensor file: u64 entry must have cols=1");
      std::vector<std::uint64_t> v(rows);
      for (auto& x : v) x = read_pod<std::uint64_t>(in);
      file.u64_[name] = std::move(v);
    } else {
      throw std::runtime_error("tensor file: unknown dtype");
    }
  }
  return file;
}

}  // namespace pedflow::io
