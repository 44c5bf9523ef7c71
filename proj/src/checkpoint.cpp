#include "pirl/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace pirl {

namespace {

constexpr char kMagic[8] = {'P', 'I', 'R', 'L', 'C', 'K', 'P', 'T'};

template <class T>
void write_pod(std::ofstream& f, T v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::ifstream& f, const std::string& path) {
  T v{};
  PIRL_CHECK(static_cast<bool>(f.read(reinterpret_cast<char*>(&v), sizeof(T))),
             "truncated checkpoint ", path);
  return v;
}

}  // namespace

const NamedTensor* Checkpoint::find(std::string_view name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  PIRL_CHECK(f.good(), "cannot open ", path, " for writing");
  f.write(kMagic, 8);
  write_pod<uint32_t>(f, version);
  write_pod<uint64_t>(f, config_echo.size());
  f.write(config_echo.data(), static_cast<std::streamsize>(config_echo.size()));
  write_pod<uint32_t>(f, static_cast<uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    PIRL_CHECK(t.data.size() == static_cast<size_t>(shape_numel(t.shape)), "tensor ", t.name,
               " buffer does not match shape ", shape_str(t.shape));
    write_pod<uint32_t>(f, static_cast<uint32_t>(t.name.size()));
    f.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_pod<uint8_t>(f, 0);  // dtype f32
    write_pod<uint8_t>(f, static_cast<uint8_t>(t.shape.size()));
    for (int d : t.shape) write_pod<uint32_t>(f, static_cast<uint32_t>(d));
  }
  for (const auto& t : tensors)
    f.write(reinterpret_cast<const char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  PIRL_CHECK(f.good(), "write failed for ", path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  PIRL_CHECK(f.good(), "cannot open checkpoint ", path);
  char magic[8];
  PIRL_CHECK(static_cast<bool>(f.read(magic, 8)) && std::memcmp(magic, kMagic, 8) == 0,
             path, " is not a PIRLCKPT checkpoint");
  Checkpoint out;
  out.version = read_pod<uint32_t>(f, path);
  PIRL_CHECK(out.version == 1, "unsupported checkpoint version ", out.version, " in ", path);
  const auto echo_len = read_pod<uint64_t>(f, path);
  out.config_echo.resize(echo_len);
  PIRL_CHECK(static_cast<bool>(f.read(out.config_echo.data(), static_cast<std::streamsize>(echo_len))),
             "truncated checkpoint ", path);
  const auto count = read_pod<uint32_t>(f, path);
  out.tensors.resize(count);
  for (auto& t : out.tensors) {
    const auto name_len = read_pod<uint32_t>(f, path);
    t.name.resize(name_len);
    PIRL_CHECK(static_cast<bool>(f.read(t.name.data(), name_len)), "truncated checkpoint ", path);
    const auto dtype = read_pod<uint8_t>(f, path);
    PIRL_CHECK(dtype == 0, "unsupported dtype ", static_cast<int>(dtype), " for ", t.name);
    const auto ndim = read_pod<uint8_t>(f, path);
    PIRL_CHECK(ndim <= 4, "tensor ", t.name, " has rank ", static_cast<int>(ndim));
    t.shape.resize(ndim);
    for (auto& d : t.shape) d = static_cast<int>(read_pod<uint32_t>(f, path));
  }
  for (auto& t : out.tensors) {
    t.data.resize(static_cast<size_t>(shape_numel(t.shape)));
    PIRL_CHECK(static_cast<bool>(f.read(reinterpret_cast<char*>(t.data.data()),
                                        static_cast<std::streamsize>(t.data.size() * sizeof(float)))),
               "truncated checkpoint ", path, " while reading ", t.name);
  }
  return out;
}

Checkpoint make_model_checkpoint(EncoderModel<float>& model, const std::string& config_echo,
                                 bool include_momentum) {
  Checkpoint ckpt;
  ckpt.config_echo = config_echo;
  for (auto* p : model.params()) ckpt.tensors.push_back({p->name, p->shape, p->value});
  if (include_momentum)
    for (auto* p : model.params())
      ckpt.tensors.push_back({"momentum/" + p->name, p->shape, p->momentum});
  return ckpt;
}

void load_model_params(const Checkpoint& ckpt, EncoderModel<float>& model) {
  for (auto* p : model.params()) {
    const NamedTensor* t = ckpt.find(p->name);
    PIRL_CHECK(t != nullptr, "checkpoint is missing parameter ", p->name);
    PIRL_CHECK(t->shape == p->shape, "parameter ", p->name, " has shape ", shape_str(t->shape),
               " in checkpoint but ", shape_str(p->shape), " in model");
    p->value = t->data;
    if (const NamedTensor* m = ckpt.find("momentum/" + p->name)) {
      PIRL_CHECK(m->shape == p->shape, "momentum buffer for ", p->name, " has shape ",
                 shape_str(m->shape));
      p->momentum = m->data;
    }
  }
}

}  // namespace pirl
