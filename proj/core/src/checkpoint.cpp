#include <cstring>
#include <fstream>

#include "termrel/error.hpp"
#include "termrel/log.hpp"
#include "termrel/model.hpp"

namespace fs = std::filesystem;

namespace termrel {

namespace {

constexpr char kMagic[5] = {'T', 'R', 'C', 'K', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw_corrupt("corrupt checkpoint: truncated file");
  return value;
}

void put_mat(std::ofstream& out, const Mat& m) {
  put<std::int64_t>(out, m.rows());
  put<std::int64_t>(out, m.cols());
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) *
                                         static_cast<std::size_t>(m.size())));
}

Mat get_mat(std::ifstream& in) {
  auto rows = get<std::int64_t>(in);
  auto cols = get<std::int64_t>(in);
  if (rows < 0 || cols < 0 || rows * cols > (1ll << 32)) {
    throw_corrupt("corrupt checkpoint: implausible tensor shape");
  }
  Mat m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) *
                                       static_cast<std::size_t>(m.size())));
  if (!in) throw_corrupt("corrupt checkpoint: truncated tensor");
  return m;
}

void put_vec(std::ofstream& out, const Vec& v) {
  put<std::int64_t>(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(sizeof(double) *
                                         static_cast<std::size_t>(v.size())));
}

Vec get_vec(std::ifstream& in) {
  auto size = get<std::int64_t>(in);
  if (size < 0 || size > (1ll << 32)) {
    throw_corrupt("corrupt checkpoint: implausible vector size");
  }
  Vec v(size);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(sizeof(double) *
                                       static_cast<std::size_t>(v.size())));
  if (!in) throw_corrupt("corrupt checkpoint: truncated vector");
  return v;
}

void put_layer(std::ofstream& out, const DenseLayer& layer) {
  put_mat(out, layer.w);
  put_vec(out, layer.b);
}

DenseLayer get_layer(std::ifstream& in) {
  DenseLayer layer;
  layer.w = get_mat(in);
  layer.b = get_vec(in);
  return layer;
}

}  // namespace

std::uint64_t input_signature(const CoreFringeGraph& graph, const Mat& x) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ull;
    }
  };
  std::int64_t meta[4] = {graph.n, graph.k, x.rows(), x.cols()};
  mix(meta, sizeof(meta));
  for (const auto& [src, dst] : graph.edges) {
    std::int32_t e[2] = {src, dst};
    mix(e, sizeof(e));
  }
  mix(x.data(), sizeof(double) * static_cast<std::size_t>(x.size()));
  return h;
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot write checkpoint: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);

  const TrainConfig& c = ckpt.config;
  put<std::uint8_t>(out, c.mode == ModelMode::HiCFL ? 1 : 0);
  put<double>(out, c.learning_rate);
  put<std::int32_t>(out, c.epochs);
  put<double>(out, c.dropout);
  put<std::int32_t>(out, c.hidden);
  put<std::int32_t>(out, c.gcn_layers);
  put<double>(out, c.alpha);
  put<std::uint64_t>(out, c.seed);
  put<double>(out, c.beta1);
  put<double>(out, c.beta2);
  put<double>(out, c.adam_eps);

  put<std::uint64_t>(out, ckpt.input_hash);
  put<std::int32_t>(out, ckpt.best_epoch);

  const ModelParams& p = ckpt.params;
  put<std::int32_t>(out, p.input_dim);
  put<std::int32_t>(out, p.hidden);
  put<std::int32_t>(out, p.levels);
  put<double>(out, p.alpha);
  put<std::int32_t>(out, static_cast<std::int32_t>(p.gcn.size()));
  for (const auto& layer : p.gcn) put_layer(out, layer);
  put<std::int32_t>(out, static_cast<std::int32_t>(p.bn.size()));
  for (const auto& bn : p.bn) {
    put_vec(out, bn.gamma);
    put_vec(out, bn.beta);
    put_vec(out, bn.running_mean);
    put_vec(out, bn.running_var);
  }
  if (p.mode == ModelMode::HiCFL) {
    put<std::int32_t>(out, static_cast<std::int32_t>(p.global.size()));
    for (const auto& layer : p.global) put_layer(out, layer);
    put_layer(out, p.global_out);
    for (const auto& layer : p.local_hidden) put_layer(out, layer);
    for (const auto& layer : p.local_out) put_layer(out, layer);
  }
  if (!out) throw_io("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open checkpoint: " + path.string());
  char magic[5];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw_corrupt("not a checkpoint file (bad magic): " + path.string());
  }
  if (get<std::uint32_t>(in) != kVersion) {
    throw_corrupt("unsupported checkpoint version");
  }
  Checkpoint ckpt;
  TrainConfig& c = ckpt.config;
  c.mode = get<std::uint8_t>(in) == 1 ? ModelMode::HiCFL : ModelMode::CFL;
  c.learning_rate = get<double>(in);
  c.epochs = get<std::int32_t>(in);
  c.dropout = get<double>(in);
  c.hidden = get<std::int32_t>(in);
  c.gcn_layers = get<std::int32_t>(in);
  c.alpha = get<double>(in);
  c.seed = get<std::uint64_t>(in);
  c.beta1 = get<double>(in);
  c.beta2 = get<double>(in);
  c.adam_eps = get<double>(in);

  ckpt.input_hash = get<std::uint64_t>(in);
  ckpt.best_epoch = get<std::int32_t>(in);

  ModelParams& p = ckpt.params;
  p.mode = c.mode;
  p.input_dim = get<std::int32_t>(in);
  p.hidden = get<std::int32_t>(in);
  p.levels = get<std::int32_t>(in);
  p.alpha = get<double>(in);
  auto n_gcn = get<std::int32_t>(in);
  for (std::int32_t l = 0; l < n_gcn; ++l) p.gcn.push_back(get_layer(in));
  auto n_bn = get<std::int32_t>(in);
  for (std::int32_t l = 0; l < n_bn; ++l) {
    BatchNormState bn;
    bn.gamma = get_vec(in);
    bn.beta = get_vec(in);
    bn.running_mean = get_vec(in);
    bn.running_var = get_vec(in);
    p.bn.push_back(std::move(bn));
  }
  if (p.mode == ModelMode::HiCFL) {
    auto n_heads = get<std::int32_t>(in);
    if (n_heads != p.levels) {
      throw_corrupt("corrupt checkpoint: head count mismatch");
    }
    for (std::int32_t l = 0; l < n_heads; ++l) {
      p.global.push_back(get_layer(in));
    }
    p.global_out = get_layer(in);
    for (std::int32_t l = 0; l < n_heads; ++l) {
      p.local_hidden.push_back(get_layer(in));
    }
    for (std::int32_t l = 0; l < n_heads; ++l) {
      p.local_out.push_back(get_layer(in));
    }
  }
  return ckpt;
}

}  // namespace termrel
