#include <cstdint>

#include "gridssl/io_util.hpp"
#include "gridssl/model.hpp"

namespace gridssl {

namespace {
constexpr std::uint32_t kCkptVersion = 1;
constexpr std::uint32_t kMlpLayers = 3;
}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  const auto& p = c.params;
  FileWriter f(path);
  f.magic("GSCK");
  f.u32(kCkptVersion);
  f.u32(static_cast<std::uint32_t>(p.n_units));
  f.u32(static_cast<std::uint32_t>(p.hidden));
  f.u32(kMlpLayers);
  f.u8(p.train_g0 ? 1 : 0);
  f.u64(c.updates);
  f.u64(c.master_seed);
  for (const auto* t : p.all()) f.f64_array(t->data(), t->size());
  f.close();
}

Checkpoint load_checkpoint(const std::string& path) {
  FileReader f(path);
  f.expect_magic("GSCK", "model checkpoint");
  std::uint32_t version = f.u32();
  if (version != kCkptVersion)
    throw IoError(path + ": unsupported checkpoint version " +
                  std::to_string(version));
  Checkpoint c;
  std::uint32_t n = f.u32();
  std::uint32_t h = f.u32();
  std::uint32_t layers = f.u32();
  if (layers != kMlpLayers)
    throw IoError(path + ": checkpoint declares " + std::to_string(layers) +
                  " MLP layers, this build supports 3");
  if (n == 0 || h == 0 || n > 4096 || h > 65536)
    throw IoError(path + ": implausible checkpoint dimensions");
  bool train_g0 = f.u8() != 0;
  c.updates = f.u64();
  c.master_seed = f.u64();

  auto& p = c.params;
  p.n_units = n;
  p.hidden = h;
  p.train_g0 = train_g0;
  p.w1 = Tensor<double>(Shape::mat(h, 2));
  p.b1 = Tensor<double>(Shape::vec(h));
  p.w2 = Tensor<double>(Shape::mat(h, h));
  p.b2 = Tensor<double>(Shape::vec(h));
  p.w3 = Tensor<double>(Shape::mat(static_cast<std::size_t>(n) * n, h));
  p.b3 = Tensor<double>(Shape::vec(static_cast<std::size_t>(n) * n));
  p.g0 = Tensor<double>(Shape::vec(n));
  for (auto* t : p.all()) f.f64_array(t->data(), t->size());
  f.expect_eof("model checkpoint");
  return c;
}

}  // namespace gridssl
