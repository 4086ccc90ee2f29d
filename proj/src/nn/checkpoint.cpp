#include "pielab/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

namespace pielab::nn {

using nlohmann::json;

nlohmann::json spec_to_json(const ModelSpec& spec) {
  return json{{"family", std::string(to_string(spec.family))},
              {"vocab_size", spec.vocab_size},
              {"embedding_dim", spec.embedding_dim},
              {"hidden_dim", spec.hidden_dim},
              {"num_classes", spec.num_classes},
              {"kind", std::string(to_string(spec.kind))}};
}

ModelSpec spec_from_json(const nlohmann::json& j) {
  ModelSpec s;
  s.family = family_from_string(j.at("family").get<std::string>());
  s.vocab_size = j.at("vocab_size").get<int>();
  s.embedding_dim = j.at("embedding_dim").get<int>();
  s.hidden_dim = j.at("hidden_dim").get<int>();
  s.num_classes = j.at("num_classes").get<int>();
  s.kind = label_kind_from_string(j.at("kind").get<std::string>());
  s.validate();
  return s;
}

void append_f32_le(std::vector<std::uint8_t>& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
}

float read_f32_le(const std::uint8_t* p) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[b]) << (8 * b);
  return std::bit_cast<float>(bits);
}

namespace {

void append_u64_le(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

std::uint64_t read_u64_le(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  return v;
}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks
  std::size_t off = 0;
  while (off < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1U << 30));
    crc = crc32(crc, bytes.data() + off, chunk);
    off += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

struct ArrayBlob {
  json entry;
  std::vector<std::uint8_t> bytes;
};

ArrayBlob float_array(const std::string& name, const std::string& kind, const Matrix<float>& m, Role role) {
  ArrayBlob a;
  a.bytes.reserve(static_cast<std::size_t>(m.size()) * 4);
  for (Eigen::Index i = 0; i < m.size(); ++i) append_f32_le(a.bytes, m.data()[i]);
  a.entry = {{"name", name}, {"kind", kind}, {"role", std::string(to_string(role))}, {"dtype", "f32"},
             {"shape", {m.rows(), m.cols()}}};
  return a;
}

}  // namespace

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt) {
  std::vector<ArrayBlob> arrays;
  for (std::size_t i = 0; i < ckpt.params.layers.size(); ++i) {
    const auto& l = ckpt.params.layers[i];
    arrays.push_back(float_array(l.name, "param", l.value, l.role));
  }
  if (!ckpt.optimizer.velocity.empty()) {
    if (ckpt.optimizer.velocity.size() != ckpt.params.layers.size())
      throw Error("checkpoint: optimizer state does not match parameters");
    for (std::size_t i = 0; i < ckpt.params.layers.size(); ++i) {
      const auto& l = ckpt.params.layers[i];
      arrays.push_back(float_array(l.name + ".velocity", "velocity", ckpt.optimizer.velocity[i], l.role));
    }
  }
  if (ckpt.mask) {
    for (const auto& e : ckpt.mask->entries) {
      ArrayBlob a;
      a.bytes = pack_bits(e.active);
      a.entry = {{"name", e.layer + ".mask"}, {"kind", "mask"}, {"dtype", "bits"}, {"count", e.active.size()}};
      arrays.push_back(std::move(a));
    }
  }

  json dir = json::array();
  std::uint64_t offset = 0;
  for (auto& a : arrays) {
    a.entry["offset"] = offset;
    a.entry["bytes"] = a.bytes.size();
    offset += a.bytes.size();
    dir.push_back(a.entry);
  }
  json meta = {{"format_version", ckpt.format_version},
               {"spec", spec_to_json(ckpt.params.spec)},
               {"epoch", ckpt.epoch},
               {"optimizer_step", ckpt.optimizer.step},
               {"has_optimizer", !ckpt.optimizer.velocity.empty()},
               {"rng_state", ckpt.rng_state},
               {"arrays", dir}};
  if (ckpt.mask) meta["mask_target"] = ckpt.mask->target;
  const std::string meta_text = meta.dump();

  std::vector<std::uint8_t> out(kCheckpointMagic.begin(), kCheckpointMagic.end());
  append_u64_le(out, meta_text.size());
  out.insert(out.end(), meta_text.begin(), meta_text.end());
  for (const auto& a : arrays) out.insert(out.end(), a.bytes.begin(), a.bytes.end());
  const auto crc = crc32_of(std::span(out).subspan(kCheckpointMagic.size()));
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(crc >> (8 * b)));
  return out;
}

Checkpoint deserialize(std::span<const std::uint8_t> bytes) {
  const auto magic_len = kCheckpointMagic.size();
  if (bytes.size() < magic_len || std::memcmp(bytes.data(), kCheckpointMagic.data(), magic_len) != 0) {
    if (bytes.size() >= 6 && std::memcmp(bytes.data(), "PIELAB", 6) == 0)
      throw FormatError("unsupported checkpoint format version (expected PIELAB1)");
    throw FormatError("not a PIELAB1 checkpoint (bad magic header)");
  }
  if (bytes.size() < magic_len + 8 + 4) throw FormatError("truncated checkpoint");
  const auto body = bytes.subspan(magic_len, bytes.size() - magic_len - 4);
  const auto* tail = bytes.data() + bytes.size() - 4;
  std::uint32_t stored_crc = 0;
  for (int b = 0; b < 4; ++b) stored_crc |= static_cast<std::uint32_t>(tail[b]) << (8 * b);

  const auto meta_len = read_u64_le(body.data());
  if (meta_len > body.size() - 8) throw FormatError("truncated checkpoint (metadata block)");
  json meta;
  try {
    meta = json::parse(body.begin() + 8, body.begin() + 8 + static_cast<std::ptrdiff_t>(meta_len));
  } catch (const json::parse_error&) {
    throw FormatError("corrupt checkpoint metadata");
  }
  const auto payload = body.subspan(8 + meta_len);
  std::uint64_t expected_payload = 0;
  for (const auto& a : meta.at("arrays")) expected_payload += a.at("bytes").get<std::uint64_t>();
  if (payload.size() != expected_payload) throw FormatError("truncated checkpoint (array payload)");
  if (crc32_of(body) != stored_crc) throw FormatError("checkpoint checksum mismatch");

  Checkpoint ckpt;
  ckpt.format_version = meta.at("format_version").get<int>();
  if (ckpt.format_version != kCheckpointVersion)
    throw FormatError("checkpoint format version " + std::to_string(ckpt.format_version) + " is not supported");
  ckpt.epoch = meta.at("epoch").get<int>();
  ckpt.rng_state = meta.at("rng_state").get<std::string>();
  ckpt.params.spec = spec_from_json(meta.at("spec"));
  ckpt.optimizer.step = meta.at("optimizer_step").get<std::int64_t>();
  if (meta.contains("mask_target")) {
    ckpt.mask.emplace();
    ckpt.mask->target = meta["mask_target"].get<double>();
  }

  for (const auto& a : meta.at("arrays")) {
    const auto off = a.at("offset").get<std::uint64_t>();
    const auto len = a.at("bytes").get<std::uint64_t>();
    if (off + len > payload.size()) throw FormatError("array directory points past the payload");
    const auto* p = payload.data() + off;
    const auto kind = a.at("kind").get<std::string>();
    const auto name = a.at("name").get<std::string>();
    if (kind == "mask") {
      const auto count = a.at("count").get<std::size_t>();
      if (!ckpt.mask) throw FormatError("mask array without mask metadata");
      const std::string layer = name.substr(0, name.size() - std::string_view(".mask").size());
      ckpt.mask->entries.push_back({layer, unpack_bits(std::vector<std::uint8_t>(p, p + len), count)});
      continue;
    }
    const auto rows = a.at("shape").at(0).get<Eigen::Index>();
    const auto cols = a.at("shape").at(1).get<Eigen::Index>();
    if (static_cast<std::uint64_t>(rows * cols) * 4 != len) throw FormatError("array " + name + " has inconsistent size");
    Matrix<float> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = read_f32_le(p + 4 * i);
    if (kind == "param") {
      ckpt.params.layers.push_back({name, role_from_string(a.at("role").get<std::string>()), std::move(m)});
    } else if (kind == "velocity") {
      ckpt.optimizer.velocity.push_back(std::move(m));
    } else {
      throw FormatError("unknown array kind \"" + kind + "\"");
    }
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = serialize(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("missing checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return deserialize(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace pielab::nn
