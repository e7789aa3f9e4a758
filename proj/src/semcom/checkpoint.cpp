#include "semcom/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "semcom/error.hpp"

namespace semcom {

namespace {

using nlohmann::json;

constexpr std::size_t kHeaderBytes = 4 + 1 + 4;

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

void put_f32(std::vector<unsigned char>& out, double v) { put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v))); }

json describe(const ParameterSet& ps, std::vector<const Tensor*>& blob, std::uint64_t& offset) {
  json tensors = json::array();
  for (const Parameter& p : ps) {
    tensors.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"offset", offset}});
    offset += p.value.size();
    blob.push_back(&p.value);
  }
  return tensors;
}

ParameterSet restore(const json& tensors, std::span<const unsigned char> blob, std::uint64_t total_floats) {
  ParameterSet ps;
  for (const json& t : tensors) {
    const std::string name = t.at("name").get<std::string>();
    const Shape shape = t.at("shape").get<Shape>();
    const std::uint64_t offset = t.at("offset").get<std::uint64_t>();
    const std::uint64_t count = shape_size(shape);
    require(offset <= total_floats && count <= total_floats - offset, ErrorCode::kIntegrity,
            "checkpoint tensor " + name + " " + shape_string(shape) + " lies outside the data blob");
    std::vector<double> values(count);
    const unsigned char* p = blob.data() + offset * 4;
    for (std::uint64_t i = 0; i < count; ++i) values[i] = std::bit_cast<float>(get_u32(p + 4 * i));
    ps.add(name, Tensor(shape, std::move(values)));
  }
  return ps;
}

}  // namespace

std::vector<unsigned char> serialize_checkpoint(const Checkpoint& ck) {
  std::vector<const Tensor*> blob;
  std::uint64_t offset = 0;
  json manifest;
  manifest["format"] = "semcom-checkpoint";
  manifest["meta"] = ck.meta;
  json modules = json::array();
  for (const auto& [slot, ex] : ck.registry) {
    modules.push_back({{"name", slot},
                       {"kind", std::string(to_string(ex.kind))},
                       {"rho", ex.rho},
                       {"manifest", ex.manifest},
                       {"tensors", describe(ex.params, blob, offset)}});
  }
  manifest["modules"] = modules;
  if (ck.gate) {
    json outputs = json::array();
    for (ExpertKind k : ck.gate->outputs) outputs.push_back(std::string(to_string(k)));
    manifest["gate"] = {{"outputs", outputs}, {"tensors", describe(ck.gate->params, blob, offset)}};
  }
  manifest["total_floats"] = offset;

  const std::string text = manifest.dump();
  require(text.size() <= 0xFFFFFFFFu, ErrorCode::kInvalidArgument, "checkpoint manifest too large");
  std::vector<unsigned char> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  out.push_back(kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + offset * 4);
  for (const Tensor* t : blob)
    for (double v : t->data()) put_f32(out, v);
  return out;
}

Checkpoint deserialize_checkpoint(std::span<const unsigned char> bytes) {
  if (bytes.size() < 4) fail(ErrorCode::kTruncated, "checkpoint truncated: missing header");
  if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) fail(ErrorCode::kBadMagic, "not a checkpoint: bad magic");
  if (bytes.size() < kHeaderBytes) fail(ErrorCode::kTruncated, "checkpoint truncated: missing header");
  if (bytes[4] != kCheckpointVersion)
    fail(ErrorCode::kBadVersion, "unsupported checkpoint version " + std::to_string(bytes[4]));
  const std::uint32_t mlen = get_u32(bytes.data() + 5);
  if (bytes.size() - kHeaderBytes < mlen) fail(ErrorCode::kTruncated, "checkpoint truncated inside the manifest");

  json manifest;
  try {
    manifest = json::parse(bytes.begin() + kHeaderBytes, bytes.begin() + kHeaderBytes + mlen);
  } catch (const json::exception& e) {
    fail(ErrorCode::kIntegrity, std::string("checkpoint manifest is not valid JSON: ") + e.what());
  }

  Checkpoint ck;
  try {
    const std::uint64_t total = manifest.at("total_floats").get<std::uint64_t>();
    const std::size_t blob_bytes = bytes.size() - kHeaderBytes - mlen;
    if (blob_bytes < total * 4)
      fail(ErrorCode::kTruncated, "checkpoint truncated: data blob has " + std::to_string(blob_bytes) +
                                      " bytes, manifest needs " + std::to_string(total * 4));
    if (blob_bytes > total * 4) fail(ErrorCode::kIntegrity, "checkpoint has trailing bytes after the data blob");
    const auto blob = bytes.subspan(kHeaderBytes + mlen);

    std::uint64_t described = 0;
    for (const json& m : manifest.at("modules")) {
      TrainedExpert ex;
      ex.slot = m.at("name").get<std::string>();
      ex.kind = parse_expert_kind(m.at("kind").get<std::string>());
      ex.rho = m.at("rho").get<double>();
      ex.manifest = m.at("manifest");
      ex.params = restore(m.at("tensors"), blob, total);
      described += ex.params.scalar_count();
      ck.registry.put(std::move(ex));
    }
    if (manifest.contains("gate")) {
      GateModel g;
      for (const json& k : manifest["gate"].at("outputs")) g.outputs.push_back(parse_expert_kind(k.get<std::string>()));
      g.params = restore(manifest["gate"].at("tensors"), blob, total);
      described += g.params.scalar_count();
      ck.gate = std::move(g);
    }
    if (described != total)
      fail(ErrorCode::kIntegrity, "checkpoint manifest shapes cover " + std::to_string(described) +
                                      " floats but the blob holds " + std::to_string(total));
    ck.meta = manifest.value("meta", json::object());
  } catch (const json::exception& e) {
    fail(ErrorCode::kIntegrity, std::string("checkpoint manifest is malformed: ") + e.what());
  }
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ck);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot write checkpoint: " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::kIo, "failed writing checkpoint: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::kIo, "cannot move checkpoint into place: " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open checkpoint: " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace semcom
