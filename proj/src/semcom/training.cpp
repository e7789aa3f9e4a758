#include "semcom/training.hpp"

#include <algorithm>
#include <cmath>

#include "semcom/attacks.hpp"
#include "semcom/error.hpp"

namespace semcom {

namespace {

std::vector<int> labels_of(const LabeledSet& set, std::span<const std::size_t> idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(set.labels[i]);
  return out;
}

double draw_snr(Rng& rng, const TrainOptions& o) {
  const auto span = static_cast<std::uint64_t>(o.snr_max_db - o.snr_min_db + 1);
  return static_cast<double>(o.snr_min_db + static_cast<int>(rng.below(span)));
}

nlohmann::json adam_json(const AdamConfig& a) {
  return {{"lr", a.lr}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"eps", a.eps}};
}

nlohmann::json train_json(const TrainOptions& o, std::uint64_t seed) {
  return {{"seed", seed},
          {"epochs", o.epochs},
          {"batch_size", o.batch_size},
          {"adam", adam_json(o.adam)},
          {"snr_range_db", {o.snr_min_db, o.snr_max_db}}};
}

TrainedExpert train_semantic(const DatasetSplit& data, const TrainOptions& o, const SdmOptions* sdm,
                             std::uint64_t seed) {
  require(data.train.size() > 0, ErrorCode::kInvalidArgument, "training set is empty");
  CodecDims dims = o.dims;
  dims.classes = data.num_classes;
  Rng init(seed, "codec/init");
  TrainedExpert ex;
  ex.params = init_semantic_codec(dims, init);
  ex.kind = sdm ? ExpertKind::kRobust : ExpertKind::kNormal;
  ex.slot = std::string(to_string(ex.kind));

  Batcher batches(data.train.size(), o.batch_size, Rng(seed, "codec/batches"));
  Rng snr_rng(seed, "codec/snr");
  Rng noise_rng(seed, "codec/noise");
  Rng start_rng(seed, "codec/pgd_start");
  const bool adversarial = sdm && sdm->pgd_steps > 0;
  const bool channel_adv = sdm && sdm->channel_steps > 0 && sdm->channel_epsilon > 0.0;
  std::uint64_t step = 0;
  nlohmann::json epoch_loss = nlohmann::json::array();
  const Tensor no_keys;

  for (int e = 0; e < o.epochs; ++e) {
    double total = 0.0;
    std::size_t nb = 0;
    for (const auto& idx : batches.next_epoch()) {
      const Tensor x = gather_rows(data.train.images, idx);
      const auto lab = labels_of(data.train, idx);
      const Tensor noise = awgn_noise(idx.size(), dims.semantic, draw_snr(snr_rng, o), noise_rng);
      const Tensor keys({idx.size(), 1});

      Tensor x_adv;
      if (adversarial) {
        const Route frozen{Binding::frozen(ex.params), std::nullopt, std::nullopt};
        x_adv = pgd_linf(frozen, x, lab, keys, sdm->epsilon, sdm->pgd_steps,
                         sdm->step_size > 0.0 ? sdm->step_size : sdm->epsilon / 4.0, &noise,
                         sdm->random_start ? &start_rng : nullptr);
      }

      Tensor noisy_delta;
      if (channel_adv) {
        const Route frozen{Binding::frozen(ex.params), std::nullopt, std::nullopt};
        ad::Tape ft;
        Tensor s = ad::add_constant(frozen.transmit(ft, ft.constant_ref(x), ft.constant_ref(keys)), noise).value();
        const double ramp = sdm->channel_warmup_epochs > 0
                                ? std::min(1.0, static_cast<double>(e + 1) / sdm->channel_warmup_epochs)
                                : 1.0;
        const double radius = ramp * sdm->channel_epsilon * std::sqrt(static_cast<double>(dims.semantic));
        noisy_delta = pgd_l2_symbols(frozen, s, lab, keys, radius, sdm->channel_steps, radius / 2.0);
        for (std::size_t i = 0; i < noisy_delta.size(); ++i) noisy_delta[i] += noise[i];
      }

      ex.params.zero_grad();
      ad::Tape t;
      const Route route{Binding::trainable(ex.params), std::nullopt, std::nullopt};
      ad::Var kv = t.constant_ref(keys);
      ad::Var f = route.features(t, t.constant_ref(x));
      ad::Var sym = route.transmit_features(t, f, kv);
      ad::Var loss = ad::softmax_cross_entropy(route.receive(t, ad::add_constant(sym, noise), kv), lab);
      if (channel_adv)
        loss = ad::add(loss, ad::softmax_cross_entropy(route.receive(t, ad::add_constant(sym, noisy_delta), kv), lab));
      if (adversarial) {
        ad::Var fa = route.features(t, t.constant_ref(x_adv));
        ad::Var la = route.receive(t, ad::add_constant(route.transmit_features(t, fa, kv), noise), kv);
        loss = ad::add(loss, ad::softmax_cross_entropy(la, lab));
        if (sdm->beta != 0.0) loss = ad::add(loss, ad::scale(ad::row_sq_distance(f, fa), sdm->beta));
      }
      t.backward(loss);
      adam_step(ex.params, o.adam, ++step);
      total += loss.value().item();
      ++nb;
    }
    epoch_loss.push_back(total / static_cast<double>(nb));
  }
  ex.params.round_to_float();
  ex.manifest = train_json(o, seed);
  ex.manifest["epoch_loss"] = epoch_loss;
  if (sdm)
    ex.manifest["sdm"] = {{"epsilon", sdm->epsilon},
                          {"pgd_steps", sdm->pgd_steps},
                          {"step_size", sdm->step_size},
                          {"beta", sdm->beta},
                          {"random_start", sdm->random_start},
                          {"channel_epsilon", sdm->channel_epsilon},
                          {"channel_steps", sdm->channel_steps},
                          {"channel_warmup_epochs", sdm->channel_warmup_epochs}};
  return ex;
}

}  // namespace

TrainedExpert train_normal(const DatasetSplit& data, const TrainOptions& opts, std::uint64_t seed) {
  return train_semantic(data, opts, nullptr, seed);
}

TrainedExpert train_robust_sdm(const DatasetSplit& data, const TrainOptions& opts, const SdmOptions& sdm,
                               std::uint64_t seed) {
  require(sdm.epsilon > 0.0, ErrorCode::kInvalidArgument, "SDM attack budget epsilon must be positive");
  return train_semantic(data, opts, &sdm, seed);
}

TrainedExpert train_private(const DatasetSplit& data, const ExpertRegistry& registry, const TrainOptions& o,
                            const PrivateOptions& priv, std::uint64_t seed) {
  std::vector<const TrainedExpert*> bases{&registry.require_kind(ExpertKind::kNormal)};
  if (registry.has("robust")) bases.push_back(&registry.at("robust"));
  CodecDims dims = o.dims;
  dims.classes = data.num_classes;

  Rng init(seed, "private/init");
  TrainedExpert ex;
  ex.kind = ExpertKind::kPrivate;
  ex.slot = "private";
  ex.params = init_privacy_stage(dims, init);

  // Simulated eavesdropper: same decoder architecture, own weights.
  ParameterSet eve_sem, eve_priv;
  for (const Parameter& p : bases[0]->params)
    if (p.name.starts_with("channel.rx.") || p.name.starts_with("head.")) eve_sem.add(p.name, p.value);
  for (const Parameter& p : ex.params)
    if (p.name.starts_with("keyed_decoder.")) eve_priv.add(p.name, p.value);

  std::vector<Tensor> features;
  for (const TrainedExpert* b : bases) features.push_back(semantic_batch(data.train.images, *b));

  Batcher batches(data.train.size(), o.batch_size, Rng(seed, "private/batches"));
  Rng snr_rng(seed, "private/snr");
  Rng noise_rng(seed, "private/noise");
  const double k = static_cast<double>(data.num_classes);
  std::uint64_t step = 0, message = 0;
  nlohmann::json legit_log = nlohmann::json::array(), eve_log = nlohmann::json::array();

  for (int e = 0; e < o.epochs; ++e) {
    double legit_sum = 0.0, eve_sum = 0.0;
    std::size_t nb = 0;
    for (const auto& idx : batches.next_epoch()) {
      const std::size_t bi = nb % bases.size();
      const TrainedExpert& base = *bases[bi];
      const auto lab = labels_of(data.train, idx);
      const auto msg = message_range(message, idx.size());
      message += idx.size();
      const Tensor keys = session_keys(priv.secret_seed, msg, dims.key);
      const Tensor zeros({idx.size(), dims.key});
      const Tensor y = gather_rows(features[bi], idx);
      const Tensor noise = awgn_noise(idx.size(), dims.semantic, draw_snr(snr_rng, o), noise_rng);
      const Tensor uniform({idx.size(), static_cast<std::size_t>(data.num_classes)}, 1.0 / k);

      // Batches from a hardened codec keep its channel budget through the stage.
      const nlohmann::json sdm = base.manifest.value("sdm", nlohmann::json::object());
      const double chan_eps = sdm.value("channel_epsilon", 0.0);
      const int chan_steps = sdm.value("channel_steps", 0);
      const int warmup = sdm.value("channel_warmup_epochs", 0);
      Tensor noisy_delta;
      if (chan_eps > 0.0 && chan_steps > 0) {
        const Route frozen{Binding::frozen(base.params), Binding::frozen(ex.params), std::nullopt};
        ad::Tape ft;
        const Tensor s =
            ad::add_constant(frozen.transmit_features(ft, ft.constant_ref(y), ft.constant_ref(keys)), noise).value();
        const double ramp = warmup > 0 ? std::min(1.0, static_cast<double>(e + 1) / warmup) : 1.0;
        const double radius = ramp * chan_eps * std::sqrt(static_cast<double>(dims.semantic));
        noisy_delta = pgd_l2_symbols(frozen, s, lab, keys, radius, chan_steps, radius / 2.0);
        for (std::size_t i = 0; i < noisy_delta.size(); ++i) noisy_delta[i] += noise[i];
      }

      // Legitimate pair.
      ex.params.zero_grad();
      Tensor received;
      {
        ad::Tape t;
        const Route legit{Binding::frozen(base.params), Binding::trainable(ex.params), std::nullopt};
        const Route eve{Binding::frozen(eve_sem), Binding::frozen(eve_priv), std::nullopt, false};
        ad::Var kv = t.constant_ref(keys);
        ad::Var yv = t.constant_ref(y);
        ad::Var sym = legit.transmit_features(t, yv, kv);
        ad::Var r = ad::add_constant(sym, noise);
        ad::Var loss = ad::softmax_cross_entropy(legit.receive(t, r, kv), lab);
        legit_sum += loss.value().item();
        if (noisy_delta.size() > 0)
          loss = ad::add(loss, ad::softmax_cross_entropy(legit.receive(t, ad::add_constant(sym, noisy_delta), kv), lab));
        if (priv.reconstruction_weight != 0.0) {
          ad::Var inner = mlp(t, *legit.privacy, "keyed_encoder", ad::concat_cols(yv, kv));
          ad::Var back = mlp(t, *legit.privacy, "keyed_decoder", ad::concat_cols(inner, kv));
          loss = ad::add(loss, ad::scale(ad::mse(back, yv), priv.reconstruction_weight));
        }
        if (priv.confusion_weight != 0.0) {
          ad::Var conf = ad::soft_cross_entropy(eve.receive(t, r, t.constant_ref(zeros)), uniform);
          loss = ad::add(loss, ad::scale(conf, priv.confusion_weight));
        }
        t.backward(loss);
        received = r.value();
      }
      adam_step(ex.params, o.adam, ++step);

      // Simulated eavesdropper on the same traffic.
      eve_sem.zero_grad();
      eve_priv.zero_grad();
      {
        ad::Tape t;
        const Route eve{Binding::trainable(eve_sem), Binding::trainable(eve_priv), std::nullopt, false};
        ad::Var loss =
            ad::softmax_cross_entropy(eve.receive(t, t.constant(received), t.constant_ref(zeros)), lab);
        eve_sum += loss.value().item();
        t.backward(loss);
      }
      adam_step(eve_sem, o.adam, step);
      adam_step(eve_priv, o.adam, step);
      ++nb;
    }
    legit_log.push_back(legit_sum / static_cast<double>(nb));
    eve_log.push_back(eve_sum / static_cast<double>(nb));
  }
  ex.params.round_to_float();
  ex.manifest = train_json(o, seed);
  ex.manifest["secret_seed"] = priv.secret_seed;
  ex.manifest["confusion_weight"] = priv.confusion_weight;
  ex.manifest["reconstruction_weight"] = priv.reconstruction_weight;
  ex.manifest["legit_loss"] = legit_log;
  ex.manifest["eavesdropper_loss"] = eve_log;
  ex.manifest["bases"] = nlohmann::json::array();
  for (const TrainedExpert* b : bases) ex.manifest["bases"].push_back(b->slot);
  return ex;
}

double covert_reconstruction_mse(const TrainedExpert& covert, const Tensor& features) {
  ad::Tape t;
  const Binding b = Binding::frozen(covert.params);
  ad::Var y = t.constant_ref(features);
  return ad::mse(dense(t, b, "decompressor", dense(t, b, "compressor", y)), y).value().item();
}

TrainedExpert train_covert_compressor(const DatasetSplit& data, const ExpertRegistry& registry, double rho,
                                      const TrainOptions& o, const CovertOptions& cov, std::uint64_t seed) {
  const TrainedExpert& normal = registry.require_kind(ExpertKind::kNormal);
  CodecDims dims = o.dims;
  const std::size_t dc = compressed_dim(dims.semantic, rho);

  // Every semantic vector distribution the compressor may follow: each
  // registered semantic codec, with and without the keyed privacy stage.
  std::vector<Tensor> pools;
  std::vector<const TrainedExpert*> bases{&normal};
  if (registry.has("robust")) bases.push_back(&registry.at("robust"));
  const TrainedExpert* priv = registry.has("private") ? &registry.at("private") : nullptr;
  const std::uint64_t priv_secret =
      priv ? priv->manifest.value("secret_seed", PrivateOptions{}.secret_seed) : PrivateOptions{}.secret_seed;
  for (const TrainedExpert* b : bases) {
    Tensor y = semantic_batch(data.train.images, *b);
    if (priv) {
      const auto msg = message_range(0, y.rows());
      const Tensor keys = session_keys(priv_secret, msg, dims.key);
      ad::Tape t;
      const Tensor yp = mlp(t, Binding::frozen(priv->params), "keyed_encoder",
                            ad::concat_cols(t.constant_ref(y), t.constant_ref(keys)))
                            .value();
      pools.push_back(yp);
    }
    pools.push_back(std::move(y));
  }
  // The robust codec's budgets, when one is registered, also harden the
  // bottleneck: adversarial source features join the pool and the channel
  // codec learns to undo perturbations aimed at the robust pipeline.
  const TrainedExpert* robust = registry.has("robust") ? &registry.at("robust") : nullptr;
  const nlohmann::json sdm = robust ? robust->manifest.value("sdm", nlohmann::json::object()) : nlohmann::json();
  const double src_eps = robust ? sdm.value("epsilon", 0.0) : 0.0;
  const int src_steps = robust ? sdm.value("pgd_steps", 0) : 0;
  const double chan_eps = robust ? sdm.value("channel_epsilon", 0.0) : 0.0;
  const int chan_steps = robust ? sdm.value("channel_steps", 0) : 0;
  const int chan_warmup = robust ? sdm.value("channel_warmup_epochs", 0) : 0;
  const Tensor no_keys({data.train.size(), 1});
  std::size_t robust_rows = 0;
  if (robust) robust_rows = pools.size() - 1;  // plain robust features are the last pool
  const std::size_t normal_rows = priv ? 1 : 0;
  if (robust && src_eps > 0.0 && src_steps > 0) {
    Rng start(seed, "covert/pgd_start");
    const Route frozen{Binding::frozen(robust->params), std::nullopt, std::nullopt};
    const Tensor x_adv = pgd_linf(frozen, data.train.images, data.train.labels, no_keys, src_eps, src_steps,
                                  src_eps / 4.0, nullptr, &start);
    pools.push_back(semantic_batch(x_adv, *robust));
  }
  const bool harden = robust && chan_eps > 0.0 && chan_steps > 0;

  Tensor all = pools[0];
  for (std::size_t i = 1; i < pools.size(); ++i) {
    Tensor next({all.rows() + pools[i].rows(), all.cols()});
    std::copy(all.data().begin(), all.data().end(), next.data().begin());
    std::copy(pools[i].data().begin(), pools[i].data().end(), next.row(all.rows()).begin());
    all = std::move(next);
  }

  Rng init(seed, "covert/init");
  TrainedExpert ex;
  ex.kind = ExpertKind::kCovert;
  ex.rho = rho;
  ex.slot = covert_slot(rho);
  ex.params = init_covert_stage(dims, rho, init);

  std::uint64_t step = 0;
  Batcher batches(all.rows(), o.batch_size, Rng(seed, "covert/batches"));
  nlohmann::json ae_log = nlohmann::json::array();
  for (int e = 0; e < cov.epochs; ++e) {
    double total = 0.0;
    std::size_t nb = 0;
    for (const auto& idx : batches.next_epoch()) {
      ex.params.zero_grad();
      ad::Tape t;
      const Binding b = Binding::trainable(ex.params);
      ad::Var y = t.constant(gather_rows(all, idx));
      ad::Var loss = ad::mse(dense(t, b, "decompressor", dense(t, b, "compressor", y)), y);
      t.backward(loss);
      adam_step(ex.params, o.adam, ++step);
      total += loss.value().item();
      ++nb;
    }
    ae_log.push_back(total / static_cast<double>(nb));
  }

  // Channel codec for the bottleneck, with the autoencoder frozen.
  ParameterSet chan;
  for (const Parameter& p : ex.params)
    if (p.name.starts_with("channel.")) chan.add(p.name, p.value);
  Rng snr_rng(seed, "covert/snr");
  Rng noise_rng(seed, "covert/noise");
  Rng adv_noise_rng(seed, "covert/adv_noise");
  Batcher adv_batches(data.train.size(), o.batch_size, Rng(seed, "covert/adv_batches"));
  const Tensor robust_pool = robust ? pools[robust_rows] : Tensor();
  const Tensor normal_pool = pools[normal_rows];
  const Tensor adv_pool = pools.size() > robust_rows + 1 ? pools.back() : Tensor();
  std::uint64_t cstep = 0;
  nlohmann::json channel_log = nlohmann::json::array();
  for (int e = 0; e < cov.channel_epochs; ++e) {
    double chan_total = 0.0;
    std::size_t chan_batches = 0;
    const auto adv_epoch = harden ? adv_batches.next_epoch() : std::vector<std::vector<std::size_t>>{};
    const double ramp = chan_warmup > 0 ? std::min(1.0, static_cast<double>(e + 1) / chan_warmup) : 1.0;
    const double radius = ramp * chan_eps * std::sqrt(static_cast<double>(dc));
    for (const auto& idx : batches.next_epoch()) {
      Tensor ya, noisy_delta, clean_noise, keys;
      std::vector<int> lab;
      ParameterSet current = ex.params;
      for (const Parameter& p : chan) current.at(p.name).value = p.value;
      current.zero_grad();
      if (harden) {
        const auto& aidx = adv_epoch[chan_batches % adv_epoch.size()];
        ya = gather_rows(robust_pool, aidx);
        lab = labels_of(data.train, aidx);
        keys = Tensor({aidx.size(), 1});
        const Route frozen{Binding::frozen(robust->params), std::nullopt, Binding::frozen(current)};
        const Tensor noise = awgn_noise(aidx.size(), dc, draw_snr(snr_rng, o), adv_noise_rng);
        ad::Tape ft;
        const Tensor s =
            ad::add_constant(frozen.transmit_features(ft, ft.constant_ref(ya), ft.constant_ref(keys)), noise).value();
        noisy_delta = pgd_l2_symbols(frozen, s, lab, keys, radius, chan_steps, radius / 2.0);
        for (std::size_t i = 0; i < noisy_delta.size(); ++i) noisy_delta[i] += noise[i];
        clean_noise = noise;
      }
      chan.zero_grad();
      ad::Tape t;
      const Binding ae = Binding::frozen(ex.params);
      const Binding cb = Binding::trainable(chan);
      auto reconstruct = [&](ad::Var y, const Tensor& perturbation) {
        ad::Var s = ad::power_normalize_rows(dense(t, cb, "channel.tx", dense(t, ae, "compressor", y)));
        return dense(t, ae, "decompressor", dense(t, cb, "channel.rx", ad::add_constant(s, perturbation)));
      };
      ad::Var y = t.constant(gather_rows(all, idx));
      const Tensor noise = awgn_noise(idx.size(), dc, draw_snr(snr_rng, o), noise_rng);
      ad::Var closs = ad::mse(reconstruct(y, noise), y);
      if (harden) {
        ad::Var yv = t.constant_ref(ya);
        closs = ad::add(closs, ad::mse(reconstruct(yv, noisy_delta), yv));
        if (cov.task_weight != 0.0) {
          const Route r{Binding::frozen(robust->params), std::nullopt, Binding::trainable(current)};
          ad::Var kv = t.constant_ref(keys);
          ad::Var logits = r.receive(t, ad::add_constant(r.transmit_features(t, yv, kv), noisy_delta), kv);
          closs = ad::add(closs, ad::scale(ad::softmax_cross_entropy(logits, lab), cov.task_weight));
          // The same symbols also serve the normal codec, unattacked.
          const Route rn{Binding::frozen(normal.params), std::nullopt, Binding::trainable(current)};
          ad::Var yn = t.constant(gather_rows(normal_pool, adv_epoch[chan_batches % adv_epoch.size()]));
          ad::Var ln = rn.receive(t, ad::add_constant(rn.transmit_features(t, yn, kv), clean_noise), kv);
          closs = ad::add(closs, ad::scale(ad::softmax_cross_entropy(ln, lab), cov.task_weight));
          if (adv_pool.size() > 0) {
            ad::Var yx = t.constant(gather_rows(adv_pool, adv_epoch[chan_batches % adv_epoch.size()]));
            ad::Var lx = r.receive(t, ad::add_constant(r.transmit_features(t, yx, kv), clean_noise), kv);
            closs = ad::add(closs, ad::scale(ad::softmax_cross_entropy(lx, lab), cov.task_weight));
          }
          if (priv) {
            // Normal codec behind the keyed stage, scrambled on the air.
            const auto& aidx = adv_epoch[chan_batches % adv_epoch.size()];
            const Tensor pk = session_keys(priv_secret, aidx, dims.key);
            const Route rp{Binding::frozen(normal.params), Binding::frozen(priv->params), Binding::trainable(current)};
            ad::Var pkv = t.constant_ref(pk);
            ad::Var yp = t.constant(gather_rows(normal_pool, aidx));
            ad::Var lp = rp.receive(t, ad::add_constant(rp.transmit_features(t, yp, pkv), clean_noise), pkv);
            closs = ad::add(closs, ad::scale(ad::softmax_cross_entropy(lp, lab), cov.task_weight));
          }
        }
      }
      t.backward(closs);
      for (Parameter& p : chan) {
        const Tensor& g = current.at(p.name).grad;
        for (std::size_t i = 0; i < g.size(); ++i) p.grad[i] += g[i];
      }
      adam_step(chan, o.adam, ++cstep);
      chan_total += closs.value().item();
      ++chan_batches;
    }
    channel_log.push_back(chan_total / static_cast<double>(chan_batches));
  }
  for (const Parameter& p : chan) ex.params.at(p.name).value = p.value;

  ex.params.round_to_float();
  ex.manifest = train_json(o, seed);
  ex.manifest["epochs"] = cov.epochs;
  ex.manifest["channel_epochs"] = cov.channel_epochs;
  ex.manifest["task_weight"] = cov.task_weight;
  ex.manifest["rho"] = rho;
  ex.manifest["bottleneck"] = dc;
  ex.manifest["ae_loss"] = ae_log;
  ex.manifest["channel_loss"] = channel_log;
  ex.manifest["mse"] = covert_reconstruction_mse(ex, semantic_batch(data.test.images, normal));
  return ex;
}

}  // namespace semcom
