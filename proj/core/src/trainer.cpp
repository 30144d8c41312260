#include <cinttypes>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "gridssl/io_util.hpp"
#include "gridssl/trainer.hpp"

namespace gridssl {
namespace {

namespace fs = std::filesystem;

// Seed streams under the master seed.
constexpr std::uint64_t kStreamInit = 0;
constexpr std::uint64_t kStreamBatch = 1;

struct Prepared {
  TrajectoryBatch batch;
  PairMask mask;
};

// Micro-batch k is fully determined by (master seed, k), so generation order
// and resume points cannot change the data stream.
Prepared make_batch(const TrainConfig& cfg, std::uint64_t micro_index) {
  const std::uint64_t seed = derive_seed(cfg.seed, kStreamBatch, micro_index);
  Rng rng(seed);
  Prepared p;
  p.batch = cfg.permute
                ? sample_batch(cfg.batch_size, cfg.traj_len, rng, cfg.velocity)
                : sample_batch_independent(cfg.batch_size, cfg.traj_len, rng,
                                           cfg.velocity);
  p.batch.seed = seed;
  p.mask = build_pair_masks(p.batch, cfg.loss.sigma_x);
  return p;
}

// Generates micro-batches [first, first+count) in order on a worker thread,
// at most two queued ahead of the consumer.
class BatchPipeline {
 public:
  BatchPipeline(const TrainConfig& cfg, std::uint64_t first,
                std::uint64_t count) {
    worker_ = std::thread([this, cfg, first, count] {
      for (std::uint64_t i = 0; i < count; ++i) {
        Prepared p = make_batch(cfg, first + i);
        std::unique_lock lk(mu_);
        space_.wait(lk, [this] { return q_.size() < 2 || stop_; });
        if (stop_) return;
        q_.push_back(std::move(p));
        item_.notify_one();
      }
    });
  }

  ~BatchPipeline() {
    {
      std::lock_guard lk(mu_);
      stop_ = true;
    }
    space_.notify_all();
    if (worker_.joinable()) worker_.join();
  }

  Prepared next() {
    std::unique_lock lk(mu_);
    item_.wait(lk, [this] { return !q_.empty(); });
    Prepared p = std::move(q_.front());
    q_.pop_front();
    space_.notify_one();
    return p;
  }

 private:
  std::mutex mu_;
  std::condition_variable item_, space_;
  std::deque<Prepared> q_;
  bool stop_ = false;
  std::thread worker_;
};

std::string state_path(const std::string& ckpt) {
  if (ckpt.size() >= 5 && ckpt.compare(ckpt.size() - 5, 5, ".gsck") == 0)
    return ckpt.substr(0, ckpt.size() - 5) + ".gsts";
  return ckpt + ".gsts";
}

// Keep only the first keep_lines lines of the metrics log, so a resumed run
// appends exactly after the update it restarts from.
void truncate_metrics(const std::string& path, std::uint64_t keep_lines) {
  std::FILE* in = std::fopen(path.c_str(), "rb");
  if (!in) return;
  const std::string tmp = path + ".tmp";
  std::FILE* out = std::fopen(tmp.c_str(), "wb");
  if (!out) {
    std::fclose(in);
    throw IoError("cannot rewrite metrics log: " + path);
  }
  std::vector<char> buf(1 << 16);
  std::uint64_t seen = 0;
  bool done = keep_lines == 0;
  bool ok = true;
  while (!done) {
    std::size_t n = std::fread(buf.data(), 1, buf.size(), in);
    if (n == 0) break;
    std::size_t emit = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (buf[i] == '\n' && ++seen == keep_lines) {
        emit = i + 1;
        done = true;
        break;
      }
    }
    if (std::fwrite(buf.data(), 1, emit, out) != emit) {
      ok = false;
      break;
    }
  }
  std::fclose(in);
  if (std::fclose(out) != 0 || !ok)
    throw IoError("cannot rewrite metrics log: " + path);
  fs::rename(tmp, path);
}

template <class Real>
void dump_divergence(const std::string& run_dir, const Trainer<Real>& tr,
                     const TrainConfig& cfg, std::uint64_t update,
                     std::uint64_t micro, std::uint64_t batch_seed,
                     const char* what) {
  Checkpoint c;
  c.params = ModelParams<double>::cast(tr.params());
  c.updates = tr.update_count();
  c.master_seed = cfg.seed;
  save_checkpoint(run_dir + "/diverged.gsck", c);
  std::FILE* f = std::fopen((run_dir + "/diverged.json").c_str(), "wb");
  if (!f) return;
  std::fprintf(f,
               "{\"error\":\"%s\",\"update\":%" PRIu64 ",\"micro\":%" PRIu64
               ",\"batch_seed\":%" PRIu64 "}\n",
               what, update, micro, batch_seed);
  std::fclose(f);
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

template <class Real>
TrainResult run_impl(const TrainConfig& cfg, const std::string& run_dir,
                     const std::string& resume) {
  fs::create_directories(run_dir);
  PlateauScheduler sched(cfg.learning_rate, cfg.scheduler);
  std::uint64_t start = 0;

  ModelParams<Real> params;
  if (resume.empty()) {
    Rng rng(derive_seed(cfg.seed, kStreamInit, 0));
    params = ModelParams<Real>::init(cfg.n_units, cfg.hidden, rng, cfg.train_g0);
  } else {
    Checkpoint ck = load_checkpoint(resume);
    if (ck.master_seed != cfg.seed)
      throw ConfigError("resume checkpoint was produced under a different seed");
    if (ck.params.n_units != cfg.n_units || ck.params.hidden != cfg.hidden ||
        ck.params.train_g0 != cfg.train_g0)
      throw ConfigError("resume checkpoint does not match the model config");
    params = ModelParams<Real>::cast(ck.params);
    start = ck.updates;
  }

  Trainer<Real> trainer(std::move(params), cfg);
  if (!resume.empty()) {
    TrainState ts = load_train_state(state_path(resume));
    if (ts.updates != start)
      throw ConfigError("training state disagrees with the checkpoint");
    trainer.restore_opt(ts);
    sched.restore(ts.lr, ts.best, ts.wait);
  }

  TrainResult res;
  res.updates = start;
  res.final_lr = sched.lr();
  res.metrics_path = run_dir + "/metrics.jsonl";

  std::unique_ptr<std::FILE, FileCloser> mf;
  if (resume.empty()) {
    mf.reset(std::fopen(res.metrics_path.c_str(), "wb"));
  } else {
    truncate_metrics(res.metrics_path, start);
    mf.reset(std::fopen(res.metrics_path.c_str(), "ab"));
  }
  if (!mf) throw IoError("cannot open metrics log: " + res.metrics_path);

  auto write_ckpt = [&](std::uint64_t k) {
    Checkpoint c;
    c.params = ModelParams<double>::cast(trainer.params());
    c.updates = k;
    c.master_seed = cfg.seed;
    const std::string path =
        run_dir + "/ckpt_step" + std::to_string(k) + ".gsck";
    save_checkpoint(path, c);
    TrainState ts = trainer.snapshot_opt();
    ts.micro_count = k * cfg.accumulate_batches;
    ts.lr = sched.lr();
    ts.best = sched.best();
    ts.wait = sched.wait();
    save_train_state(state_path(path), ts);
    res.last_checkpoint = path;
  };

  if (resume.empty())
    write_ckpt(0);
  else
    res.last_checkpoint = resume;

  const std::uint64_t todo = cfg.max_steps > start ? cfg.max_steps - start : 0;
  std::unique_ptr<BatchPipeline> pipe;
  if (cfg.worker_threads > 1 && todo > 0)
    pipe = std::make_unique<BatchPipeline>(cfg, start * cfg.accumulate_batches,
                                           todo * cfg.accumulate_batches);

  for (std::uint64_t k = start; k < cfg.max_steps; ++k) {
    LossBreakdown acc{};
    for (std::size_t a = 0; a < cfg.accumulate_batches; ++a) {
      const std::uint64_t micro = k * cfg.accumulate_batches + a;
      Prepared pr = pipe ? pipe->next() : make_batch(cfg, micro);
      LossBreakdown lb;
      try {
        lb = trainer.micro_step(pr.batch, pr.mask);
      } catch (const NumericError& e) {
        dump_divergence(run_dir, trainer, cfg, k + 1, micro, pr.batch.seed,
                        e.what());
        throw;
      }
      acc.sep += lb.sep;
      acc.inv += lb.inv;
      acc.cap += lb.cap;
      acc.coniso += lb.coniso;
      acc.total += lb.total;
      acc.far_pairs += lb.far_pairs;
      acc.near_pairs += lb.near_pairs;
      acc.coniso_count += lb.coniso_count;
      acc.coniso_starved = acc.coniso_starved || lb.coniso_starved;
    }
    const double inv_n = 1.0 / static_cast<double>(cfg.accumulate_batches);
    acc.sep *= inv_n;
    acc.inv *= inv_n;
    acc.cap *= inv_n;
    acc.coniso *= inv_n;
    acc.total *= inv_n;

    const double lr = sched.lr();
    UpdateStats st = trainer.apply_update(lr);

    MetricsRecord rec;
    rec.update = k + 1;
    rec.loss = acc;
    rec.lr = lr;
    rec.grad_norm = st.grad_norm;
    std::string line = format_metrics_line(rec);
    line.push_back('\n');
    if (std::fwrite(line.data(), 1, line.size(), mf.get()) != line.size())
      throw IoError("cannot append to metrics log: " + res.metrics_path);
    std::fflush(mf.get());

    sched.step(acc.total);
    res.updates = k + 1;
    res.final_loss = acc.total;
    res.final_lr = sched.lr();

    if (cfg.checkpoint_every != 0 && (k + 1) % cfg.checkpoint_every == 0)
      write_ckpt(k + 1);
  }

  const bool have_final = cfg.checkpoint_every != 0 &&
                          cfg.max_steps % cfg.checkpoint_every == 0 &&
                          cfg.max_steps > start;
  if (cfg.max_steps > start && !have_final) write_ckpt(cfg.max_steps);
  return res;
}

}  // namespace

TrainResult run_training(const TrainConfig& cfg, const std::string& run_dir,
                         const std::string& resume_checkpoint) {
  cfg.validate();
  if (cfg.precision == Precision::f32)
    return run_impl<float>(cfg, run_dir, resume_checkpoint);
  return run_impl<double>(cfg, run_dir, resume_checkpoint);
}

}  // namespace gridssl
