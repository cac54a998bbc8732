// SPDX-License-Identifier: Apache-2.0
#include "itrlhf/snapshot.hpp"

#include <array>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace itrlhf {

namespace {

static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");

void put_u64(std::ostream& os, std::uint64_t v) {
  std::array<char, 8> bytes{};
  std::memcpy(bytes.data(), &v, 8);
  os.write(bytes.data(), 8);
}

std::uint64_t get_u64(std::istream& is) {
  std::array<char, 8> bytes{};
  if (!is.read(bytes.data(), 8)) throw std::runtime_error("snapshot: truncated length field");
  std::uint64_t v = 0;
  std::memcpy(&v, bytes.data(), 8);
  return v;
}

}  // namespace

void write_snapshot(const std::filesystem::path& path, nlohmann::json header,
                    const Eigen::VectorXd& params) {
  header["count"] = params.size();
  header["dtype"] = "f64le";
  const std::string text = header.dump();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("snapshot: cannot open " + path.string() + " for writing");
  os.write(kSnapshotMagic.data(), static_cast<std::streamsize>(kSnapshotMagic.size()));
  put_u64(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  os.write(reinterpret_cast<const char*>(params.data()),
           static_cast<std::streamsize>(params.size() * sizeof(double)));
  if (!os) throw std::runtime_error("snapshot: write failed for " + path.string());
}

Snapshot read_snapshot(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("snapshot: cannot open " + path.string());
  std::string magic(kSnapshotMagic.size(), '\0');
  if (!is.read(magic.data(), static_cast<std::streamsize>(magic.size())) || magic != kSnapshotMagic)
    throw std::runtime_error("snapshot: bad magic in " + path.string());
  const std::uint64_t header_len = get_u64(is);
  std::string text(header_len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(header_len)))
    throw std::runtime_error("snapshot: truncated header in " + path.string());
  Snapshot snap;
  snap.header = nlohmann::json::parse(text);
  const auto count = snap.header.at("count").get<Eigen::Index>();
  snap.params.resize(count);
  if (!is.read(reinterpret_cast<char*>(snap.params.data()),
               static_cast<std::streamsize>(count * sizeof(double))))
    throw std::runtime_error("snapshot: truncated parameters in " + path.string());
  return snap;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string params_hash(const Eigen::VectorXd& params) {
  return fnv1a_hex({reinterpret_cast<const char*>(params.data()),
                    static_cast<std::size_t>(params.size()) * sizeof(double)});
}

void save_policy(const std::filesystem::path& path, const Policy& pol, int iteration, long step) {
  nlohmann::json h;
  h["kind"] = "policy";
  h["arch_tag"] = pol.arch_tag();
  h["shape"] = {pol.feat_dim(), pol.n_responses()};
  h["iteration"] = iteration;
  h["checkpoint_step"] = step;
  write_snapshot(path, std::move(h), pol.params());
}

Policy load_policy(const std::filesystem::path& path) {
  Snapshot snap = read_snapshot(path);
  if (snap.header.value("kind", "") != "policy")
    throw std::runtime_error("snapshot: " + path.string() + " is not a policy");
  const auto shape = snap.header.at("shape").get<std::vector<Eigen::Index>>();
  Policy pol(shape.at(0), shape.at(1));
  if (pol.params().size() != snap.params.size())
    throw ArchitectureMismatch("snapshot: policy parameter count does not match shape");
  pol.params() = snap.params;
  return pol;
}

void save_reward_model(const std::filesystem::path& path, const RewardModel& rm, int iteration) {
  nlohmann::json h;
  h["kind"] = "reward_model";
  h["arch_tag"] = rm.arch_tag();
  h["widths"] = rm.net.widths();
  h["base_seed"] = rm.base_seed;
  h["head_seed"] = rm.head_seed;
  h["iteration"] = iteration;
  write_snapshot(path, std::move(h), rm.net.params());
}

RewardModel load_reward_model(const std::filesystem::path& path) {
  Snapshot snap = read_snapshot(path);
  if (snap.header.value("kind", "") != "reward_model")
    throw std::runtime_error("snapshot: " + path.string() + " is not a reward model");
  RewardModel rm{Mlp<double>(snap.header.at("widths").get<std::vector<int>>()),
                 snap.header.at("base_seed").get<std::uint64_t>(),
                 snap.header.at("head_seed").get<std::uint64_t>()};
  if (rm.net.params().size() != snap.params.size())
    throw ArchitectureMismatch("snapshot: reward model parameter count does not match widths");
  rm.net.params() = snap.params;
  return rm;
}

}  // namespace itrlhf
