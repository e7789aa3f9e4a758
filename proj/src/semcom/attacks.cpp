#include "semcom/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "semcom/error.hpp"
#include "semcom/optim.hpp"

namespace semcom {

namespace {

constexpr std::size_t kChunk = 500;

template <typename Fn>
Tensor map_chunks(std::size_t rows, std::size_t cols, Fn&& fn) {
  Tensor out({rows, cols});
  for (std::size_t b = 0; b < rows; b += kChunk) {
    const std::size_t n = std::min(kChunk, rows - b);
    const Tensor part = fn(b, n);
    std::copy(part.data().begin(), part.data().end(), out.row(b).begin());
  }
  return out;
}

std::vector<int> slice(std::span<const int> v, std::size_t b, std::size_t n) {
  return std::vector<int>(v.begin() + static_cast<std::ptrdiff_t>(b), v.begin() + static_cast<std::ptrdiff_t>(b + n));
}

double posterior_loss(const Tensor& post, int label) {
  return -std::log(std::max(post[static_cast<std::size_t>(label)], 1e-300));
}

void copy_params(const ParameterSet& src, ParameterSet& dst, std::initializer_list<std::string_view> prefixes) {
  for (const Parameter& p : src)
    for (std::string_view pre : prefixes)
      if (p.name.starts_with(pre)) dst.add(p.name, p.value);
}

}  // namespace

void AttackSpec::validate() const {
  require(epsilon >= 0.0, ErrorCode::kInvalidArgument, "attack epsilon must be non-negative");
  require(steps >= 0, ErrorCode::kInvalidArgument, "attack steps must be non-negative");
  require(surface == AttackSurface::kSource || mode == AttackMode::kWhitebox, ErrorCode::kInvalidArgument,
          "black-box attacks are defined for the source surface only");
  require(mode == AttackMode::kWhitebox || query_budget >= 1, ErrorCode::kInvalidArgument,
          "black-box attacks need query_budget >= 1");
}

Tensor pgd_linf(const Route& route, const Tensor& images, std::span<const int> labels, const Tensor& keys,
                double epsilon, int steps, double step, const Tensor* noise, Rng* start) {
  Tensor adv = images;
  if (epsilon <= 0.0 || steps <= 0) return adv;
  if (start)
    for (std::size_t i = 0; i < adv.size(); ++i)
      adv[i] = std::clamp(images[i] + start->uniform(-epsilon, epsilon), 0.0, 1.0);
  for (int s = 0; s < steps; ++s) {
    ad::Tape t;
    ad::Var x = t.input(adv);
    ad::Var sym = route.transmit(t, x, t.constant_ref(keys));
    if (noise) sym = ad::add_constant(sym, *noise);
    ad::Var loss = ad::softmax_cross_entropy(route.receive(t, sym, t.constant_ref(keys)), labels);
    t.backward(loss);
    const Tensor g = x.grad();
    for (std::size_t i = 0; i < adv.size(); ++i) {
      const double dir = g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0);
      const double v = std::clamp(adv[i] + step * dir, images[i] - epsilon, images[i] + epsilon);
      adv[i] = std::clamp(v, 0.0, 1.0);
    }
  }
  return adv;
}

Tensor pgd_source(const Tensor& images, std::span<const int> labels, const CodecPipeline& p, const AttackSpec& spec,
                  std::span<const std::uint64_t> msg) {
  spec.validate();
  p.validate();
  const Route route = p.route();
  const Tensor keys = p.keys_for(msg);
  return map_chunks(images.rows(), images.cols(), [&](std::size_t b, std::size_t n) {
    const auto lab = slice(labels, b, n);
    return pgd_linf(route, slice_rows(images, b, n), lab, slice_rows(keys, b, n), spec.epsilon, spec.steps,
                    spec.effective_step(), nullptr, nullptr);
  });
}

Tensor blackbox_source(const Tensor& image, int label, const PosteriorOracle& oracle, const AttackSpec& spec) {
  spec.validate();
  Tensor x = image;
  if (spec.query_budget == 0 || spec.epsilon <= 0.0) return x;
  const std::size_t n = x.size();
  const std::size_t side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(n))));
  require(side * side == n, ErrorCode::kShapeMismatch, "black-box attack expects a square image");
  Rng rng(spec.seed, "blackbox/source");

  auto apply = [&](const std::vector<double>& delta) {
    Tensor c = image;
    for (std::size_t i = 0; i < n; ++i) c[i] = std::clamp(image[i] + delta[i], 0.0, 1.0);
    return c;
  };

  std::vector<double> best(n);
  for (double& d : best) d = spec.epsilon * rng.sign();
  Tensor best_x = apply(best);
  Tensor post = oracle(best_x);
  std::size_t queries = 1;
  double best_loss = posterior_loss(post, label);
  bool fooled = static_cast<int>(argmax(post.data())) != label;

  while (queries < spec.query_budget && !fooled) {
    const double frac = static_cast<double>(queries) / static_cast<double>(spec.query_budget);
    const std::size_t w = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(5.0 - 4.0 * frac)));
    const std::size_t r0 = static_cast<std::size_t>(rng.below(side - w + 1));
    const std::size_t c0 = static_cast<std::size_t>(rng.below(side - w + 1));
    const double sgn = rng.sign();
    std::vector<double> cand = best;
    for (std::size_t r = r0; r < r0 + w; ++r)
      for (std::size_t c = c0; c < c0 + w; ++c) cand[r * side + c] = spec.epsilon * sgn;
    if (cand == best) continue;
    Tensor cx = apply(cand);
    post = oracle(cx);
    ++queries;
    const double loss = posterior_loss(post, label);
    if (loss > best_loss) {
      best_loss = loss;
      best = std::move(cand);
      best_x = std::move(cx);
      fooled = static_cast<int>(argmax(post.data())) != label;
    }
  }
  return best_x;
}

Tensor blackbox_source_batch(const Tensor& images, std::span<const int> labels, const CodecPipeline& p,
                             const AttackSpec& spec, std::span<const std::uint64_t> msg) {
  p.validate();
  require(images.rows() == labels.size() && labels.size() == msg.size(), ErrorCode::kShapeMismatch,
          "black-box attack: images, labels and message indices differ in count");
  Tensor out = images;
  for (std::size_t i = 0; i < images.rows(); ++i) {
    const std::uint64_t id[1] = {msg[i]};
    PosteriorOracle oracle = [&](const Tensor& img) {
      return decode_batch(encode_batch(img.reshaped({1, img.size()}), p, id), p, id);
    };
    AttackSpec s = spec;
    s.seed = stream_seed(spec.seed, static_cast<std::uint64_t>(i));
    const Tensor x({images.cols()}, std::vector<double>(images.row(i).begin(), images.row(i).end()));
    const Tensor adv = blackbox_source(x, labels[i], oracle, s);
    std::copy(adv.data().begin(), adv.data().end(), out.row(i).begin());
  }
  return out;
}

Tensor pgd_l2_symbols(const Route& route, const Tensor& symbols, std::span<const int> labels, const Tensor& keys,
                      double radius, int steps, double step) {
  const std::size_t n = symbols.rows(), m = symbols.cols();
  Tensor delta({n, m});
  for (int s = 0; s < steps; ++s) {
    Tensor cur = symbols;
    for (std::size_t i = 0; i < cur.size(); ++i) cur[i] += delta[i];
    ad::Tape t;
    ad::Var r = t.input(std::move(cur));
    t.backward(ad::softmax_cross_entropy(route.receive(t, r, t.constant_ref(keys)), labels));
    const Tensor g = r.grad();
    for (std::size_t row = 0; row < n; ++row) {
      auto gr = g.row(row);
      auto dr = delta.row(row);
      double gn = 0.0;
      for (double v : gr) gn += v * v;
      gn = std::sqrt(gn);
      if (gn > 0.0)
        for (std::size_t j = 0; j < m; ++j) dr[j] += step * gr[j] / gn;
      double dn = 0.0;
      for (double v : dr) dn += v * v;
      dn = std::sqrt(dn);
      if (dn > radius)
        for (double& v : dr) v *= radius / dn;
    }
  }
  return delta;
}

Tensor pgd_channel(const Tensor& symbols, std::span<const int> labels, const CodecPipeline& p,
                   const AttackSpec& spec, std::span<const std::uint64_t> msg) {
  spec.validate();
  p.validate();
  require(symbols.cols() == p.symbol_count(), ErrorCode::kShapeMismatch, "channel attack: block size mismatch");
  const Route route = p.route();
  const Tensor keys = p.keys_for(msg);
  const std::size_t m = symbols.cols();
  const double radius = spec.epsilon * std::sqrt(static_cast<double>(m));
  const double step = spec.effective_step() * std::sqrt(static_cast<double>(m));
  if (radius <= 0.0 || spec.steps <= 0) return symbols;
  return map_chunks(symbols.rows(), m, [&](std::size_t b, std::size_t n) {
    Tensor out = slice_rows(symbols, b, n);
    const Tensor delta = pgd_l2_symbols(route, out, slice(labels, b, n), slice_rows(keys, b, n), radius, spec.steps, step);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += delta[i];
    return out;
  });
}

Traffic intercept(const CodecPipeline& p, const LabeledSet& set, std::uint64_t first_message, double snr_db,
                  Rng& noise) {
  require(set.size() > 0, ErrorCode::kInvalidArgument, "intercept: empty message set");
  const auto msg = message_range(first_message, set.size());
  Tensor sym = map_chunks(set.size(), p.symbol_count(), [&](std::size_t b, std::size_t n) {
    return encode_batch(slice_rows(set.images, b, n), p, std::span(msg).subspan(b, n));
  });
  const Tensor nz = awgn_noise(sym.rows(), sym.cols(), snr_db, noise);
  for (std::size_t i = 0; i < sym.size(); ++i) sym[i] += nz[i];
  return Traffic{std::move(sym), set.labels};
}

// ---------------------------------------------------------------------------

Route Eavesdropper::route(bool) {
  Route r{Binding::trainable(semantic_), std::nullopt, std::nullopt, false};
  if (privacy_) r.privacy = Binding::trainable(*privacy_);
  if (covert_) r.covert = Binding::trainable(*covert_);
  return r;
}

Route Eavesdropper::route() const {
  Route r{Binding::frozen(semantic_), std::nullopt, std::nullopt, false};
  if (privacy_) r.privacy = Binding::frozen(*privacy_);
  if (covert_) r.covert = Binding::frozen(*covert_);
  return r;
}

Tensor Eavesdropper::posteriors(const Tensor& received) const {
  const Route r = route();
  return map_chunks(received.rows(), static_cast<std::size_t>(semantic_.at("head.1.b").value.size()),
                    [&](std::size_t b, std::size_t n) {
                      ad::Tape t;
                      const Tensor zeros({n, key_len_ ? key_len_ : 1});
                      return ad::softmax_rows(
                          r.receive(t, t.constant(slice_rows(received, b, n)), t.constant(zeros)).value());
                    });
}

Eavesdropper train_eavesdropper(const Traffic& traffic, const CodecPipeline& p, int epochs, std::uint64_t seed) {
  require(traffic.labels.size() > 0 && traffic.received.rows() == traffic.labels.size(), ErrorCode::kInvalidArgument,
          "train_eavesdropper: empty or inconsistent traffic");
  p.validate();
  require(traffic.received.cols() == p.symbol_count(), ErrorCode::kShapeMismatch,
          "train_eavesdropper: traffic block size differs from the pipeline");
  Eavesdropper eve;
  copy_params(p.semantic->params, eve.semantic_, {"channel.tx.", "channel.rx.", "head."});
  if (p.covert) {
    eve.covert_.emplace();
    copy_params(p.covert->params, *eve.covert_, {"channel.rx.", "decompressor."});
  }
  if (p.privacy) {
    eve.privacy_.emplace();
    copy_params(p.privacy->params, *eve.privacy_, {"keyed_decoder."});
    eve.key_len_ = eve.privacy_->at("keyed_decoder.0.W").value.rows() - p.semantic->params.at("channel.rx.b").value.size();
  }

  std::vector<ParameterSet*> sets{&eve.semantic_};
  if (eve.covert_) sets.push_back(&*eve.covert_);
  if (eve.privacy_) sets.push_back(&*eve.privacy_);
  const Route r = eve.route(true);
  Batcher batches(traffic.labels.size(), 64, Rng(seed, "eavesdropper/batches"));
  const AdamConfig adam;
  std::uint64_t step = 0;
  for (int e = 0; e < epochs; ++e) {
    for (const auto& idx : batches.next_epoch()) {
      for (ParameterSet* s : sets) s->zero_grad();
      ad::Tape t;
      std::vector<int> lab;
      for (std::size_t i : idx) lab.push_back(traffic.labels[i]);
      const Tensor zeros({idx.size(), eve.key_len_ ? eve.key_len_ : 1});
      ad::Var logits = r.receive(t, t.constant(gather_rows(traffic.received, idx)), t.constant(zeros));
      t.backward(ad::softmax_cross_entropy(logits, lab));
      ++step;
      for (ParameterSet* s : sets) adam_step(*s, adam, step);
    }
  }
  return eve;
}

// ---------------------------------------------------------------------------

std::vector<MetricRow> EvalResult::rows(const EvalContext& ctx, double snr_db) const {
  std::vector<MetricRow> out;
  out.push_back({ctx.scenario, ctx.expert_set, snr_db, "accuracy", accuracy, ctx.seed});
  if (eavesdropper_accuracy)
    out.push_back({ctx.scenario, ctx.expert_set, snr_db, "eavesdropper_accuracy", *eavesdropper_accuracy, ctx.seed});
  return out;
}

EvalResult evaluate_under_attack(const CodecPipeline& p, const LabeledSet& set, const std::optional<AttackSpec>& spec,
                                 const ChannelConfig& cfg, std::uint64_t seed, const Eavesdropper* eve,
                                 const Tensor* adversarial_images) {
  p.validate();
  const auto msg = message_range(kEvalMessageBase, set.size());
  Tensor images = set.images;
  if (adversarial_images) {
    images = *adversarial_images;
  } else if (spec && spec->surface == AttackSurface::kSource) {
    if (spec->mode == AttackMode::kWhitebox) {
      images = pgd_source(set.images, set.labels, p, *spec, msg);
    } else {
      images = blackbox_source_batch(set.images, set.labels, p, *spec, msg);
    }
  }
  Tensor sym = map_chunks(set.size(), p.symbol_count(), [&](std::size_t b, std::size_t n) {
    return encode_batch(slice_rows(images, b, n), p, std::span(msg).subspan(b, n));
  });
  if (spec && spec->surface == AttackSurface::kChannel) sym = pgd_channel(sym, set.labels, p, *spec, msg);
  Rng noise(seed, "eval/awgn");
  const Tensor nz = awgn_noise(sym.rows(), sym.cols(), cfg.snr_db, noise);
  for (std::size_t i = 0; i < sym.size(); ++i) sym[i] += nz[i];

  EvalResult res;
  const Tensor post = map_chunks(set.size(), static_cast<std::size_t>(p.num_classes()), [&](std::size_t b, std::size_t n) {
    return decode_batch(slice_rows(sym, b, n), p, std::span(msg).subspan(b, n));
  });
  res.accuracy = accuracy(post, set.labels);
  if (eve) res.eavesdropper_accuracy = accuracy(eve->posteriors(sym), set.labels);
  return res;
}

}  // namespace semcom
