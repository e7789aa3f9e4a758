#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "semcom/autodiff.hpp"
#include "semcom/channel.hpp"
#include "semcom/dataset.hpp"

namespace semcom {

enum class ExpertKind : std::uint8_t { kNormal = 0, kRobust = 1, kPrivate = 2, kCovert = 3 };
inline constexpr std::size_t kExpertKindCount = 4;

std::string_view to_string(ExpertKind kind) noexcept;
ExpertKind parse_expert_kind(std::string_view name);

// Layer widths shared by every expert of one trained system.
struct CodecDims {
  std::size_t image = kImagePixels;
  std::size_t hidden = 128;
  std::size_t semantic = 32;
  std::size_t head_hidden = 64;
  std::size_t key = 16;
  std::size_t keyed_hidden = 128;
  int classes = 8;
};

// d' = round(d_sem / rho); rho must be >= 1 and leave at least 2 dims.
std::size_t compressed_dim(std::size_t semantic_dim, double rho);
// Registry slot name for a covert compressor, e.g. "covert@2.00".
std::string covert_slot(double rho);

struct TrainedExpert {
  ExpertKind kind = ExpertKind::kNormal;
  std::string slot;
  double rho = 1.0;
  ParameterSet params;
  nlohmann::json manifest = nlohmann::json::object();

  std::uint64_t hash() const noexcept { return params.hash(); }
};

// Experts are keyed by slot: "normal", "robust", "private", "covert@<rho>".
class ExpertRegistry {
 public:
  void put(TrainedExpert expert);
  bool has(std::string_view slot) const noexcept;
  const TrainedExpert& at(std::string_view slot) const;
  const TrainedExpert& require_kind(ExpertKind kind, double rho = 1.0) const;
  std::vector<std::string> slots() const;
  std::map<std::string, std::uint64_t> hashes() const;
  std::size_t size() const noexcept { return experts_.size(); }
  auto begin() const noexcept { return experts_.begin(); }
  auto end() const noexcept { return experts_.end(); }

 private:
  std::map<std::string, TrainedExpert, std::less<>> experts_;
};

// How one forward pass sees a ParameterSet: trainable (gradients flow into
// it) or frozen (weights enter the tape as constants).
class Binding {
 public:
  static Binding trainable(ParameterSet& ps) { return Binding(&ps, &ps); }
  static Binding frozen(const ParameterSet& ps) { return Binding(nullptr, &ps); }

  ad::Var operator()(ad::Tape& tape, std::string_view name) const;
  const ParameterSet& params() const noexcept { return *view_; }

 private:
  Binding(ParameterSet* mut, const ParameterSet* view) : mut_(mut), view_(view) {}
  ParameterSet* mut_;
  const ParameterSet* view_;
};

void add_dense(ParameterSet& ps, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng);
void add_mlp(ParameterSet& ps, const std::string& prefix, std::initializer_list<std::size_t> widths, Rng& rng);
ad::Var dense(ad::Tape& t, const Binding& b, std::string_view prefix, ad::Var x);
// ReLU between layers, linear output. Layer count is read from the set.
ad::Var mlp(ad::Tape& t, const Binding& b, std::string_view prefix, ad::Var x);

// Parameter layouts of the expert kinds.
ParameterSet init_semantic_codec(const CodecDims& d, Rng& rng);
ParameterSet init_privacy_stage(const CodecDims& d, Rng& rng);
ParameterSet init_covert_stage(const CodecDims& d, double rho, Rng& rng);

// A concrete composition of stages with their bindings. Transmitter order:
// semantic encode -> [keyed privacy encode] -> [compress] -> channel encode
// -> power normalisation [-> key scrambling]. The receiver mirrors it in
// reverse; after decompression it loops the vector through the semantic
// codec's channel encoder/decoder without noise.
struct Route {
  Binding semantic;
  std::optional<Binding> privacy;
  std::optional<Binding> covert;
  // With a privacy stage, rotate symbols by the key's scrambler after power
  // normalisation and undo it before decoding. Off for keyless receivers.
  bool scramble = true;

  ad::Var features(ad::Tape& t, ad::Var images) const;
  // Semantic vector -> unit-power channel symbols.
  ad::Var transmit_features(ad::Tape& t, ad::Var features, ad::Var keys) const;
  ad::Var transmit(ad::Tape& t, ad::Var images, ad::Var keys) const;
  // Received symbols -> class logits.
  ad::Var receive(ad::Tape& t, ad::Var received, ad::Var keys) const;
};

// Per-message +/-1 session key derived from the shared secret.
Tensor session_key(std::uint64_t secret_seed, std::uint64_t message_index, std::size_t length = 16);
Tensor session_keys(std::uint64_t secret_seed, std::span<const std::uint64_t> message_indices,
                    std::size_t length = 16);

// Orthogonal m x m matrix seeded by the key bits.
Tensor key_scrambler(std::span<const double> key, std::size_t m);

// Message indices used for evaluation traffic start here; training traffic
// counts up from zero.
inline constexpr std::uint64_t kEvalMessageBase = 1ULL << 40;
std::vector<std::uint64_t> message_range(std::uint64_t first, std::size_t count);

struct CodecPipeline {
  const TrainedExpert* semantic = nullptr;  // normal or robust codec
  const TrainedExpert* privacy = nullptr;
  const TrainedExpert* covert = nullptr;
  std::optional<std::uint64_t> secret_seed;

  bool robust() const noexcept { return semantic && semantic->kind == ExpertKind::kRobust; }
  double rho() const noexcept { return covert ? covert->rho : 1.0; }
  std::size_t symbol_count() const;
  int num_classes() const;
  std::string label() const;
  Route route() const;
  // Keys for a batch, or zeros when the privacy stage is absent.
  Tensor keys_for(std::span<const std::uint64_t> message_indices) const;
  void validate() const;
};

SymbolBlock encode(std::span<const double> image, const CodecPipeline& p, std::uint64_t message_index);
Tensor decode(const SymbolBlock& block, const CodecPipeline& p, std::uint64_t message_index);

// Batched helpers: images [n,256] -> symbols [n,m]; received [n,m] -> posteriors [n,K].
Tensor encode_batch(const Tensor& images, const CodecPipeline& p, std::span<const std::uint64_t> msg);
Tensor decode_batch(const Tensor& received, const CodecPipeline& p, std::span<const std::uint64_t> msg);
Tensor semantic_batch(const Tensor& images, const TrainedExpert& semantic);

// Fraction of rows whose argmax equals the label.
double accuracy(const Tensor& posteriors_or_logits, std::span<const int> labels);

}  // namespace semcom
