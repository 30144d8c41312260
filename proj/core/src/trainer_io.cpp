#include <cinttypes>
#include <cstdio>

#include "gridssl/io_util.hpp"
#include "gridssl/trainer.hpp"

namespace gridssl {

// GSTS v1: optimizer + scheduler state next to a checkpoint. Layout (LE):
//   "GSTS" | u32 version | u64 updates | u64 micro_count
//   f64 lr | f64 best | u64 wait
//   u32 n_tensors | per tensor: u64 numel, f64[numel] m, f64[numel] v
void save_train_state(const std::string& path, const TrainState& s) {
  if (s.m.size() != s.v.size())
    throw ConfigError("training state has mismatched moment lists");
  FileWriter w(path);
  w.magic("GSTS");
  w.u32(1);
  w.u64(s.updates);
  w.u64(s.micro_count);
  w.f64(s.lr);
  w.f64(s.best);
  w.u64(s.wait);
  w.u32(static_cast<std::uint32_t>(s.m.size()));
  for (std::size_t i = 0; i < s.m.size(); ++i) {
    if (s.m[i].size() != s.v[i].size())
      throw ConfigError("training state has mismatched moment shapes");
    w.u64(s.m[i].size());
    w.f64_array(s.m[i].data(), s.m[i].size());
    w.f64_array(s.v[i].data(), s.v[i].size());
  }
  w.close();
}

TrainState load_train_state(const std::string& path) {
  FileReader r(path);
  r.expect_magic("GSTS", "training state");
  std::uint32_t version = r.u32();
  if (version != 1) throw IoError(path + ": unsupported training state version");
  TrainState s;
  s.updates = r.u64();
  s.micro_count = r.u64();
  s.lr = r.f64();
  s.best = r.f64();
  s.wait = r.u64();
  std::uint32_t n = r.u32();
  if (n > 64) throw IoError(path + ": implausible tensor count");
  for (std::uint32_t i = 0; i < n; ++i) {
    std::uint64_t numel = r.u64();
    if (numel == 0 || numel > (1ull << 30))
      throw IoError(path + ": implausible tensor size");
    Tensor<double> m(Shape::vec(static_cast<std::size_t>(numel)));
    Tensor<double> v(m.shape);
    r.f64_array(m.data(), m.size());
    r.f64_array(v.data(), v.size());
    s.m.push_back(std::move(m));
    s.v.push_back(std::move(v));
  }
  r.expect_eof("training state");
  return s;
}

std::string format_metrics_line(const MetricsRecord& r) {
  char buf[640];
  int n = std::snprintf(
      buf, sizeof buf,
      "{\"update\":%" PRIu64
      ",\"total\":%.17g,\"sep\":%.17g,\"inv\":%.17g,\"cap\":%.17g"
      ",\"coniso\":%.17g,\"lr\":%.17g,\"grad_norm\":%.17g"
      ",\"far_pairs\":%zu,\"near_pairs\":%zu,\"coniso_count\":%zu"
      ",\"coniso_starved\":%s}",
      r.update, r.loss.total, r.loss.sep, r.loss.inv, r.loss.cap, r.loss.coniso,
      r.lr, r.grad_norm, r.loss.far_pairs, r.loss.near_pairs,
      r.loss.coniso_count, r.loss.coniso_starved ? "true" : "false");
  if (n < 0 || n >= static_cast<int>(sizeof buf))
    throw IoError("metrics record does not fit the line buffer");
  return std::string(buf, static_cast<std::size_t>(n));
}

}  // namespace gridssl
