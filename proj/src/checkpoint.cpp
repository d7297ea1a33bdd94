#include "textplace/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace textplace::nn {
namespace {

using nlohmann::json;

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw std::runtime_error("truncated checkpoint");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
  return v;
}

void put_doubles(std::string& out, const std::vector<double>& vals) {
  for (double d : vals) put_u64(out, std::bit_cast<uint64_t>(d));
}

void get_doubles(std::istream& in, std::vector<double>& vals) {
  for (double& d : vals) d = std::bit_cast<double>(get_u64(in));
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  json header;
  header["config"] = ckpt.config;
  json tensors = json::array();
  for (const auto& [name, t] : ckpt.tensors) {
    if (!t) throw std::invalid_argument("null tensor in checkpoint");
    tensors.push_back({{"name", name}, {"shape", t->shape}});
  }
  header["tensors"] = std::move(tensors);
  if (ckpt.optimizer.present) {
    if (ckpt.optimizer.m.size() != ckpt.tensors.size() ||
        ckpt.optimizer.v.size() != ckpt.tensors.size())
      throw std::invalid_argument("optimizer state size differs from tensors");
    const auto& oc = ckpt.optimizer.config;
    header["optimizer"] = {{"lr", oc.lr},
                           {"beta1", oc.beta1},
                           {"beta2", oc.beta2},
                           {"eps", oc.eps},
                           {"weight_decay", oc.weight_decay},
                           {"step", ckpt.optimizer.step}};
  }

  std::string body;
  const std::string header_str = header.dump();
  body.reserve(sizeof(kCheckpointMagic) + 8 + header_str.size());
  body.append(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
  put_u64(body, header_str.size());
  body += header_str;
  for (const auto& [name, t] : ckpt.tensors) put_doubles(body, t->data);
  if (ckpt.optimizer.present) {
    for (const auto& m : ckpt.optimizer.m) put_doubles(body, m);
    for (const auto& v : ckpt.optimizer.v) put_doubles(body, v);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.write(body.data(), std::streamsize(body.size()));
  if (!out) throw std::runtime_error("cannot write " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);

  constexpr size_t magic_len = sizeof(kCheckpointMagic) - 1;
  char magic[magic_len];
  in.read(magic, magic_len);
  if (!in || std::memcmp(magic, kCheckpointMagic, magic_len) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);

  const uint64_t header_len = get_u64(in);
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), std::streamsize(header_len));
  if (!in) throw std::runtime_error("truncated checkpoint");
  json header = json::parse(header_str, nullptr, false);
  if (header.is_discarded() || !header.contains("tensors"))
    throw std::runtime_error("malformed checkpoint header");

  Checkpoint ckpt;
  ckpt.config = header.value("config", json::object());
  for (const auto& entry : header["tensors"]) {
    const std::string name = entry.at("name").get<std::string>();
    std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
    ckpt.tensors.emplace_back(name, make_tensor(std::move(shape)));
  }
  for (auto& [name, t] : ckpt.tensors) get_doubles(in, t->data);

  if (header.contains("optimizer")) {
    const json& opt = header["optimizer"];
    ckpt.optimizer.present = true;
    ckpt.optimizer.config.lr = opt.at("lr").get<double>();
    ckpt.optimizer.config.beta1 = opt.at("beta1").get<double>();
    ckpt.optimizer.config.beta2 = opt.at("beta2").get<double>();
    ckpt.optimizer.config.eps = opt.at("eps").get<double>();
    ckpt.optimizer.config.weight_decay = opt.at("weight_decay").get<double>();
    ckpt.optimizer.step = opt.at("step").get<int64_t>();
    for (const auto& [name, t] : ckpt.tensors) {
      ckpt.optimizer.m.emplace_back(t->numel(), 0.0);
      get_doubles(in, ckpt.optimizer.m.back());
    }
    for (const auto& [name, t] : ckpt.tensors) {
      ckpt.optimizer.v.emplace_back(t->numel(), 0.0);
      get_doubles(in, ckpt.optimizer.v.back());
    }
  }
  return ckpt;
}

}  // namespace textplace::nn
