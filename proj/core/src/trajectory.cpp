#include "pedflow/trajectory.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <stdexcept>

namespace pedflow::io {

static_assert(std::endian::native == std::endian::little,
              "trajectory format assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'P', 'F', 'T', 'R', 'A', 'J', '0', '1'};

std::size_t header_bytes(const TrajectoryHeader& header) {
  return sizeof(kMagic) + 4 * sizeof(std::uint32_t) + header.n_agents;
}

void write_header(std::ofstream& out, const TrajectoryHeader& header) {
  out.write(kMagic, sizeof(kMagic));
  auto put_u32 = [&out](std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  };
  put_u32(header.width);
  put_u32(header.height);
  put_u32(header.n_agents);
  put_u32(header.t_max);
  out.write(reinterpret_cast<const char*>(header.group_of.data()),
            static_cast<std::streamsize>(header.group_of.size()));
}

TrajectoryHeader read_header(std::ifstream& in, const std::string& path) {
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("trajectory file: bad magic in " + path);
  auto get_u32 = [&in, &path]() {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw std::runtime_error("trajectory file: truncated header in " + path);
    return v;
  };
  TrajectoryHeader header;
  header.width = get_u32();
  header.height = get_u32();
  header.n_agents = get_u32();
  header.t_max = get_u32();
  header.group_of.resize(header.n_agents);
  in.read(reinterpret_cast<char*>(header.group_of.data()), header.n_agents);
  if (!in) throw std::runtime_error("trajectory file: truncated header in " + path);
  return header;
}

bool headers_match(const TrajectoryHeader& a, const TrajectoryHeader& b) {
  return a.width == b.width && a.height == b.height && a.n_agents == b.n_agents &&
         a.t_max == b.t_max && a.group_of == b.group_of;
}

}  // namespace

std::size_t trajectory_episode_stride(const TrajectoryHeader& header) {
  return sizeof(std::uint32_t) +
         static_cast<std::size_t>(header.t_max) * header.n_agents * 2 *
             sizeof(std::uint16_t);
}

TrajectoryWriter::TrajectoryWriter(const std::string& path,
                                   const TrajectoryHeader& header)
    : header_(header), path_(path) {
  if (header.group_of.size() != header.n_agents)
    throw std::invalid_argument("trajectory writer: group_of size mismatch");
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw std::runtime_error("trajectory writer: cannot open " + path);
  write_header(out_, header_);
}

TrajectoryWriter::TrajectoryWriter(const std::string& path,
                                   const TrajectoryHeader& header,
                                   int episodes_to_keep)
    : header_(header), path_(path) {
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("trajectory writer: cannot reopen " + path);
    const TrajectoryHeader stored = read_header(in, path);
    if (!headers_match(stored, header))
      throw std::runtime_error("trajectory writer: header mismatch in " + path);
  }
  const std::size_t keep =
      header_bytes(header_) + episodes_to_keep * trajectory_episode_stride(header_);
  if (std::filesystem::file_size(path) < keep)
    throw std::runtime_error("trajectory writer: " + path +
                             " holds fewer episodes than the checkpoint");
  std::filesystem::resize_file(path, keep);
  out_.open(path, std::ios::binary | std::ios::in | std::ios::out | std::ios::ate);
  if (!out_) throw std::runtime_error("trajectory writer: cannot append to " + path);
}

void TrajectoryWriter::begin_episode(int episode_index) {
  if (snapshots_in_episode_ >= 0)
    throw std::logic_error("trajectory writer: episode already open");
  const auto index = static_cast<std::uint32_t>(episode_index);
  out_.write(reinterpret_cast<const char*>(&index), sizeof(index));
  snapshots_in_episode_ = 0;
}

void TrajectoryWriter::record_snapshot(const std::vector<grid::AgentState>& agents) {
  if (snapshots_in_episode_ < 0)
    throw std::logic_error("trajectory writer: no open episode");
  if (agents.size() != header_.n_agents)
    throw std::invalid_argument("trajectory writer: agent count mismatch");
  for (const grid::AgentState& agent : agents) {
    const std::uint16_t xy[2] = {static_cast<std::uint16_t>(agent.x),
                                 static_cast<std::uint16_t>(agent.y)};
    out_.write(reinterpret_cast<const char*>(xy), sizeof(xy));
  }
  ++snapshots_in_episode_;
}

void TrajectoryWriter::end_episode() {
  if (snapshots_in_episode_ != static_cast<int>(header_.t_max))
    throw std::logic_error("trajectory writer: episode snapshot count mismatch");
  snapshots_in_episode_ = -1;
  if (!out_) throw std::runtime_error("trajectory writer: write failed: " + path_);
}

TrajectoryReader::TrajectoryReader(const std::string& path) : path_(path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("trajectory reader: cannot open " + path);
  header_ = read_header(in, path);
  data_start_ = header_bytes(header_);
  const auto file_size = std::filesystem::file_size(path);
  const std::size_t stride = trajectory_episode_stride(header_);
  if ((file_size - data_start_) % stride != 0)
    throw std::runtime_error("trajectory reader: damaged file " + path);
  n_episodes_ = static_cast<int>((file_size - data_start_) / stride);
}

void TrajectoryReader::scan(
    const std::function<void(const TrajectorySnapshot&)>& fn) const {
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw std::runtime_error("trajectory reader: cannot open " + path_);
  in.seekg(static_cast<std::streamoff>(data_start_));

  TrajectorySnapshot snap;
  snap.positions.resize(header_.n_agents);
  std::vector<std::uint16_t> buffer(header_.n_agents * 2);
  for (int e = 0; e < n_episodes_; ++e) {
    std::uint32_t index = 0;
    in.read(reinterpret_cast<char*>(&index), sizeof(index));
    if (!in) throw std::runtime_error("trajectory reader: truncated " + path_);
    snap.episode_index = static_cast<int>(index);
    for (std::uint32_t t = 0; t < header_.t_max; ++t) {
      in.read(reinterpret_cast<char*>(buffer.data()),
              static_cast<std::streamsize>(buffer.size() * sizeof(std::uint16_t)));
      if (!in) throw std::runtime_error("trajectory reader: truncated " + path_);
      snap.t = static_cast<int>(t);
      for (std::uint32_t a = 0; a < header_.n_agents; ++a)
        snap.positions[a] = {buffer[2 * a], buffer[2 * a + 1]};
      fn(snap);
    }
  }
}

}  // namespace pedflow::io
