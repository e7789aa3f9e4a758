#include "semcom/codec.hpp"

#include <cmath>
#include <cstdio>
#include <memory>

#include "semcom/error.hpp"

namespace semcom {

std::string_view to_string(ExpertKind kind) noexcept {
  switch (kind) {
    case ExpertKind::kNormal: return "normal";
    case ExpertKind::kRobust: return "robust";
    case ExpertKind::kPrivate: return "private";
    case ExpertKind::kCovert: return "covert";
  }
  return "unknown";
}

ExpertKind parse_expert_kind(std::string_view name) {
  for (std::size_t i = 0; i < kExpertKindCount; ++i) {
    const auto k = static_cast<ExpertKind>(i);
    if (to_string(k) == name) return k;
  }
  fail(ErrorCode::kInvalidArgument, "unknown expert kind: " + std::string(name));
}

std::size_t compressed_dim(std::size_t semantic_dim, double rho) {
  require(rho >= 1.0, ErrorCode::kInvalidArgument, "compression ratio must be >= 1");
  const auto d = static_cast<std::size_t>(std::lround(static_cast<double>(semantic_dim) / rho));
  require(d >= 2, ErrorCode::kInvalidArgument,
          "compression ratio " + std::to_string(rho) + " leaves a bottleneck below 2 dims");
  return d;
}

std::string covert_slot(double rho) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "covert@%.2f", rho);
  return buf;
}

// ---------------------------------------------------------------------------

void ExpertRegistry::put(TrainedExpert expert) {
  std::string slot = expert.slot;
  experts_.insert_or_assign(std::move(slot), std::move(expert));
}

bool ExpertRegistry::has(std::string_view slot) const noexcept { return experts_.find(slot) != experts_.end(); }

const TrainedExpert& ExpertRegistry::at(std::string_view slot) const {
  auto it = experts_.find(slot);
  if (it == experts_.end()) fail(ErrorCode::kMissingExpert, "missing expert: " + std::string(slot));
  return it->second;
}

const TrainedExpert& ExpertRegistry::require_kind(ExpertKind kind, double rho) const {
  const std::string slot = kind == ExpertKind::kCovert ? covert_slot(rho) : std::string(to_string(kind));
  auto it = experts_.find(slot);
  if (it == experts_.end())
    fail(ErrorCode::kMissingExpert, "missing expert: " + std::string(to_string(kind)) +
                                        (kind == ExpertKind::kCovert ? " (slot " + slot + ")" : ""));
  return it->second;
}

std::vector<std::string> ExpertRegistry::slots() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : experts_) out.push_back(k);
  return out;
}

std::map<std::string, std::uint64_t> ExpertRegistry::hashes() const {
  std::map<std::string, std::uint64_t> out;
  for (const auto& [k, v] : experts_) out.emplace(k, v.hash());
  return out;
}

// ---------------------------------------------------------------------------

ad::Var Binding::operator()(ad::Tape& tape, std::string_view name) const {
  if (mut_) return tape.parameter(mut_->at(name));
  return tape.constant_ref(view_->at(name).value);
}

void add_dense(ParameterSet& ps, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng) {
  ps.add_glorot(prefix + ".W", in, out, rng);
  ps.add(prefix + ".b", Tensor({out}));
}

void add_mlp(ParameterSet& ps, const std::string& prefix, std::initializer_list<std::size_t> widths,
             Rng& rng) {
  const std::vector<std::size_t> w(widths);
  for (std::size_t i = 0; i + 1 < w.size(); ++i) add_dense(ps, prefix + "." + std::to_string(i), w[i], w[i + 1], rng);
}

ad::Var dense(ad::Tape& t, const Binding& b, std::string_view prefix, ad::Var x) {
  const std::string p(prefix);
  return ad::affine(x, b(t, p + ".W"), b(t, p + ".b"));
}

ad::Var mlp(ad::Tape& t, const Binding& b, std::string_view prefix, ad::Var x) {
  const std::string p(prefix);
  std::size_t layers = 0;
  while (b.params().contains(p + "." + std::to_string(layers) + ".W")) ++layers;
  require(layers > 0, ErrorCode::kInvalidArgument, "no layers under prefix " + p);
  for (std::size_t i = 0; i < layers; ++i) {
    x = dense(t, b, p + "." + std::to_string(i), x);
    if (i + 1 < layers) x = ad::relu(x);
  }
  return x;
}

ParameterSet init_semantic_codec(const CodecDims& d, Rng& rng) {
  ParameterSet ps;
  add_mlp(ps, "encoder", {d.image, d.hidden, d.semantic}, rng);
  add_dense(ps, "channel.tx", d.semantic, d.semantic, rng);
  add_dense(ps, "channel.rx", d.semantic, d.semantic, rng);
  add_mlp(ps, "head", {d.semantic, d.head_hidden, static_cast<std::size_t>(d.classes)}, rng);
  return ps;
}

ParameterSet init_privacy_stage(const CodecDims& d, Rng& rng) {
  ParameterSet ps;
  add_mlp(ps, "keyed_encoder", {d.semantic + d.key, d.keyed_hidden, d.semantic}, rng);
  add_mlp(ps, "keyed_decoder", {d.semantic + d.key, d.keyed_hidden, d.semantic}, rng);
  return ps;
}

ParameterSet init_covert_stage(const CodecDims& d, double rho, Rng& rng) {
  const std::size_t dc = compressed_dim(d.semantic, rho);
  ParameterSet ps;
  add_dense(ps, "compressor", d.semantic, dc, rng);
  add_dense(ps, "decompressor", dc, d.semantic, rng);
  add_dense(ps, "channel.tx", dc, dc, rng);
  add_dense(ps, "channel.rx", dc, dc, rng);
  return ps;
}

// ---------------------------------------------------------------------------

namespace {

std::shared_ptr<const std::vector<Tensor>> scramblers(const Tensor& keys, std::size_t m) {
  auto out = std::make_shared<std::vector<Tensor>>();
  out->reserve(keys.rows());
  for (std::size_t r = 0; r < keys.rows(); ++r) out->push_back(key_scrambler(keys.row(r), m));
  return out;
}

}  // namespace

Tensor key_scrambler(std::span<const double> key, std::size_t m) {
  require(m > 0, ErrorCode::kInvalidArgument, "scrambler dimension must be positive");
  std::string bits;
  for (double v : key) bits.push_back(v > 0.0 ? '1' : '0');
  Rng rng(stream_seed(fnv1a64(bits), "scrambler"));
  // Gram-Schmidt on a Gaussian matrix; rows of q are orthonormal.
  Tensor q({m, m});
  for (double& v : q.data()) v = rng.normal();
  for (std::size_t i = 0; i < m; ++i) {
    auto qi = q.row(i);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < i; ++j) {
        const auto qj = q.row(j);
        double d = 0.0;
        for (std::size_t c = 0; c < m; ++c) d += qi[c] * qj[c];
        for (std::size_t c = 0; c < m; ++c) qi[c] -= d * qj[c];
      }
    }
    double n = 0.0;
    for (double v : qi) n += v * v;
    n = std::sqrt(n);
    for (double& v : qi) v /= n;
  }
  return q;
}

ad::Var Route::features(ad::Tape& t, ad::Var images) const { return mlp(t, semantic, "encoder", images); }

ad::Var Route::transmit_features(ad::Tape& t, ad::Var y, ad::Var keys) const {
  if (privacy) y = mlp(t, *privacy, "keyed_encoder", ad::concat_cols(y, keys));
  ad::Var s;
  if (covert) {
    s = dense(t, *covert, "channel.tx", dense(t, *covert, "compressor", y));
  } else {
    s = dense(t, semantic, "channel.tx", y);
  }
  s = ad::power_normalize_rows(s);
  if (privacy && scramble) s = ad::rows_matmul(s, scramblers(keys.value(), s.value().cols()), false);
  return s;
}

ad::Var Route::transmit(ad::Tape& t, ad::Var images, ad::Var keys) const {
  return transmit_features(t, features(t, images), keys);
}

ad::Var Route::receive(ad::Tape& t, ad::Var r, ad::Var keys) const {
  if (privacy && scramble) r = ad::rows_matmul(r, scramblers(keys.value(), r.value().cols()), true);
  ad::Var y;
  if (covert) {
    // The decompressed vector re-enters the semantic codec's own channel
    // decoder through a noise-free local encode, so downstream stages see
    // the input distribution they were trained on.
    y = dense(t, *covert, "decompressor", dense(t, *covert, "channel.rx", r));
    y = dense(t, semantic, "channel.rx", ad::power_normalize_rows(dense(t, semantic, "channel.tx", y)));
  } else {
    y = dense(t, semantic, "channel.rx", r);
  }
  if (privacy) y = mlp(t, *privacy, "keyed_decoder", ad::concat_cols(y, keys));
  return mlp(t, semantic, "head", y);
}

// ---------------------------------------------------------------------------

Tensor session_key(std::uint64_t secret_seed, std::uint64_t message_index, std::size_t length) {
  Rng rng(stream_seed(secret_seed, message_index));
  Tensor k({length});
  for (double& v : k.data()) v = rng.sign();
  return k;
}

Tensor session_keys(std::uint64_t secret_seed, std::span<const std::uint64_t> idx, std::size_t length) {
  Tensor out({idx.size(), length});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const Tensor k = session_key(secret_seed, idx[i], length);
    std::copy(k.data().begin(), k.data().end(), out.row(i).begin());
  }
  return out;
}

std::vector<std::uint64_t> message_range(std::uint64_t first, std::size_t count) {
  std::vector<std::uint64_t> v(count);
  for (std::size_t i = 0; i < count; ++i) v[i] = first + i;
  return v;
}

void CodecPipeline::validate() const {
  require(semantic != nullptr, ErrorCode::kMissingExpert, "pipeline has no trained semantic codec");
  require(semantic->kind == ExpertKind::kNormal || semantic->kind == ExpertKind::kRobust,
          ErrorCode::kInvalidArgument, "pipeline semantic stage must be a normal or robust codec");
  require(!privacy || privacy->kind == ExpertKind::kPrivate, ErrorCode::kInvalidArgument,
          "pipeline privacy stage has the wrong expert kind");
  require(!covert || covert->kind == ExpertKind::kCovert, ErrorCode::kInvalidArgument,
          "pipeline covert stage has the wrong expert kind");
  require(!privacy || secret_seed.has_value(), ErrorCode::kInvalidArgument,
          "private stage enabled without a session key");
}

std::size_t CodecPipeline::symbol_count() const {
  validate();
  if (covert) return covert->params.at("compressor.b").value.size();
  return semantic->params.at("channel.tx.b").value.size();
}

int CodecPipeline::num_classes() const {
  validate();
  return static_cast<int>(semantic->params.at("head.1.b").value.size());
}

std::string CodecPipeline::label() const {
  if (!semantic) return "untrained";
  std::string s(to_string(semantic->kind));
  if (privacy) s += "+private";
  if (covert) s += "+" + covert->slot;
  return s;
}

Route CodecPipeline::route() const {
  validate();
  Route r{Binding::frozen(semantic->params), std::nullopt, std::nullopt};
  if (privacy) r.privacy = Binding::frozen(privacy->params);
  if (covert) r.covert = Binding::frozen(covert->params);
  return r;
}

Tensor CodecPipeline::keys_for(std::span<const std::uint64_t> msg) const {
  validate();
  const std::size_t len = privacy ? privacy->params.at("keyed_encoder.0.W").value.rows() -
                                        semantic->params.at("channel.tx.b").value.size()
                                  : 16;
  if (!privacy) return Tensor({msg.size(), len});
  return session_keys(*secret_seed, msg, len);
}

Tensor encode_batch(const Tensor& images, const CodecPipeline& p, std::span<const std::uint64_t> msg) {
  p.validate();
  require(images.rows() == msg.size(), ErrorCode::kShapeMismatch, "encode: one message index per image");
  ad::Tape t;
  const Route r = p.route();
  return r.transmit(t, t.constant_ref(images), t.constant(p.keys_for(msg))).value();
}

Tensor decode_batch(const Tensor& received, const CodecPipeline& p, std::span<const std::uint64_t> msg) {
  p.validate();
  require(received.cols() == p.symbol_count(), ErrorCode::kShapeMismatch,
          "decode: block of " + std::to_string(received.cols()) + " symbols, pipeline expects " +
              std::to_string(p.symbol_count()));
  require(received.rows() == msg.size(), ErrorCode::kShapeMismatch, "decode: one message index per block");
  ad::Tape t;
  const Route r = p.route();
  return ad::softmax_rows(r.receive(t, t.constant_ref(received), t.constant(p.keys_for(msg))).value());
}

Tensor semantic_batch(const Tensor& images, const TrainedExpert& semantic) {
  ad::Tape t;
  return mlp(t, Binding::frozen(semantic.params), "encoder", t.constant_ref(images)).value();
}

SymbolBlock encode(std::span<const double> image, const CodecPipeline& p, std::uint64_t message_index) {
  const Tensor x({1, image.size()}, std::vector<double>(image.begin(), image.end()));
  const std::uint64_t idx[1] = {message_index};
  Tensor s = encode_batch(x, p, idx);
  return SymbolBlock{s.reshaped({s.size()})};
}

Tensor decode(const SymbolBlock& block, const CodecPipeline& p, std::uint64_t message_index) {
  const std::uint64_t idx[1] = {message_index};
  Tensor post = decode_batch(block.symbols.reshaped({1, block.symbols.size()}), p, idx);
  return post.reshaped({post.size()});
}

double accuracy(const Tensor& scores, std::span<const int> labels) {
  require(scores.rows() == labels.size(), ErrorCode::kShapeMismatch, "accuracy: row/label count differs");
  if (labels.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t r = 0; r < labels.size(); ++r)
    if (static_cast<int>(argmax(scores.row(r))) == labels[r]) ++hit;
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

}  // namespace semcom
