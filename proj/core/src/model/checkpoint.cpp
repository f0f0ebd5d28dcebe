#include "codespot/model/checkpoint.hpp"

#include <string>

#include "codespot/util/binary_io.hpp"
#include "codespot/util/error.hpp"

namespace codespot::model {

namespace {
constexpr std::string_view kMagic = "CSPTCKPT";
}

void save_checkpoint(const ModelState& model, const std::filesystem::path& path) {
  BinaryWriter w;
  w.magic(kMagic);
  w.u32(kCheckpointVersion);
  const ModelConfig& c = model.config;
  w.u64(c.vocab_size);
  w.u64(c.context_len);
  w.u64(c.d_model);
  w.u64(c.n_heads);
  w.u64(c.n_layers);
  w.u64(c.seed);
  w.u64(model.registry.digest());
  w.u64(model.parameters.size());
  w.f64_array(model.parameters);
  w.save(path);
}

ModelState load_checkpoint(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.expect_magic(kMagic);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    fail(ErrorKind::kData, path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  ModelConfig c;
  c.vocab_size = r.u64();
  c.context_len = r.u64();
  c.d_model = r.u64();
  c.n_heads = r.u64();
  c.n_layers = r.u64();
  c.seed = r.u64();
  const std::uint64_t digest = r.u64();
  const std::uint64_t total = r.u64();
  ModelState state{c, ParameterRegistry::for_config(c), {}};
  if (digest != state.registry.digest() || total != state.registry.total_scalars()) {
    fail(ErrorKind::kDigest, path.string() + ": registry digest mismatch");
  }
  state.parameters = r.f64_array(total);
  if (!r.at_end()) fail(ErrorKind::kData, path.string() + ": trailing bytes after payload");
  return state;
}

ModelState load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
  ModelState state = load_checkpoint(path);
  const auto expected_digest = ParameterRegistry::for_config(expected).digest();
  if (state.registry.digest() != expected_digest) {
    fail(ErrorKind::kDigest, path.string() + ": checkpoint registry does not match the configured model");
  }
  if (!(state.config == expected)) {
    fail(ErrorKind::kDigest, path.string() + ": checkpoint config differs from the configured model");
  }
  return state;
}

}  // namespace codespot::model
