#include "skiptag/checkpoint.hpp"

#include <json.hpp>

#include <array>
#include <cstring>
#include <fstream>
#include <map>

namespace skiptag {

using json = nlohmann::json;

namespace {

constexpr std::array<char, 8> kMagic = {'S', 'K', 'I', 'P', 'T', 'A', 'G', '\0'};

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw CompatibilityError("checkpoint truncated");
  return v;
}

void put_tensor(std::ostream& out, const std::string& name, const Matrix& m) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
}

json manifest_of(const Model& model) {
  const auto& c = model.config();
  return {{"format", "skiptag-checkpoint"},
          {"version", kCheckpointVersion},
          {"mode", mode_name(c.mode)},
          {"task", task_name(c.task)},
          {"features",
           {{"word_dim", c.features.word_dim},
            {"pos_dim", c.features.pos_dim},
            {"pct_indicator_dim", c.features.pct_indicator_dim},
            {"mask_dim", c.features.mask_dim},
            {"hidden_dim", c.features.hidden_dim}}},
          {"gate_bias_init", c.gate_bias_init},
          {"constrained_decoding", c.constrained_decoding},
          {"roles", model.tags().roles()},
          {"tags", model.tags().names()},
          {"pos_vocab", model.pos_vocab().tags()},
          {"word_vocab", model.words().words()},
          {"word_vocab_hash", model.words().vocab_hash()}};
}

}  // namespace

void write_checkpoint(std::ostream& out, const Model& model) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  const std::string manifest = manifest_of(model).dump();
  put<std::uint64_t>(out, manifest.size());
  out.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
  const auto params = model.named_parameters();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size() + 1));
  put_tensor(out, "word_embeddings", model.words().table());
  for (const auto& [name, v] : params) put_tensor(out, name, v.data());
}

Model read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw CompatibilityError("not a skiptag checkpoint");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw CompatibilityError("unsupported checkpoint version " + std::to_string(version));
  const auto manifest_size = get<std::uint64_t>(in);
  std::string text(manifest_size, '\0');
  in.read(text.data(), static_cast<std::streamsize>(manifest_size));
  if (!in) throw CompatibilityError("checkpoint truncated in manifest");

  std::map<std::string, Matrix> tensors;
  const auto count = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_size = get<std::uint32_t>(in);
    std::string name(name_size, '\0');
    in.read(name.data(), name_size);
    const auto rows = get<std::uint64_t>(in);
    const auto cols = get<std::uint64_t>(in);
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * rows * cols));
    if (!in) throw CompatibilityError("checkpoint truncated in tensor '" + name + "'");
    tensors.emplace(std::move(name), std::move(m));
  }

  try {
    const json j = json::parse(text);
    ModelConfig mc;
    mc.mode = parse_mode(j.at("mode").get<std::string>());
    mc.task = parse_task(j.at("task").get<std::string>());
    const auto& f = j.at("features");
    mc.features.word_dim = f.at("word_dim").get<int>();
    mc.features.pos_dim = f.at("pos_dim").get<int>();
    mc.features.pct_indicator_dim = f.at("pct_indicator_dim").get<int>();
    mc.features.mask_dim = f.at("mask_dim").get<int>();
    mc.features.hidden_dim = f.at("hidden_dim").get<int>();
    mc.gate_bias_init = j.at("gate_bias_init").get<double>();
    mc.constrained_decoding = j.at("constrained_decoding").get<bool>();
    TagSet tags(j.at("roles").get<std::vector<std::string>>());
    if (tags.names() != j.at("tags").get<std::vector<std::string>>())
      throw CompatibilityError("manifest tag list does not match its roles");

    auto words_it = tensors.find("word_embeddings");
    if (words_it == tensors.end()) throw CompatibilityError("checkpoint has no word embeddings");
    const Matrix& table = words_it->second;
    auto vocab = j.at("word_vocab").get<std::vector<std::string>>();
    if (table.rows() != static_cast<Eigen::Index>(vocab.size()) + 1 ||
        table.cols() != mc.features.word_dim)
      throw CompatibilityError("word embedding table does not match the manifest");
    auto words = std::make_shared<WordEmbeddings>(std::move(vocab), table.bottomRows(table.rows() - 1));
    if (words->vocab_hash() != j.at("word_vocab_hash").get<std::uint64_t>())
      throw CompatibilityError("word vocabulary hash mismatch");

    Model model(mc, std::move(tags), PosVocab(j.at("pos_vocab").get<std::vector<std::string>>()),
                std::move(words), 0);
    for (auto& [name, v] : model.named_parameters()) {
      auto it = tensors.find(name);
      if (it == tensors.end()) throw CompatibilityError("checkpoint lacks parameter '" + name + "'");
      if (it->second.rows() != v.rows() || it->second.cols() != v.cols())
        throw CompatibilityError("parameter '" + name + "' has shape " +
                                 std::to_string(it->second.rows()) + "x" +
                                 std::to_string(it->second.cols()) + ", expected " +
                                 std::to_string(v.rows()) + "x" + std::to_string(v.cols()));
      v.mutable_data() = it->second;
    }
    return model;
  } catch (const json::exception& e) {
    throw CompatibilityError(std::string("bad checkpoint manifest: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CompatibilityError(std::string("bad checkpoint manifest: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  write_checkpoint(out, model);
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint", path.string());
  return read_checkpoint(in);
}

}  // namespace skiptag
