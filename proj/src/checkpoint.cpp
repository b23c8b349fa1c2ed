#include "infomtl/checkpoint.hpp"

#include <bit>
#include <fstream>

#include <json.hpp>

#include "infomtl/common.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint raw arrays assume a little-endian host");

namespace infomtl {

using nlohmann::json;

void write_f64_file(const std::filesystem::path& path,
                    const std::vector<double>& values) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for write: " + path.string());
  os.write(reinterpret_cast<const char*>(values.data()),
           static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!os) throw IoError("write failed: " + path.string());
}

std::vector<double> read_f64_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary | std::ios::ate);
  if (!is) throw IoError("cannot open: " + path.string());
  auto bytes = static_cast<size_t>(is.tellg());
  if (bytes % sizeof(double) != 0) {
    throw IoError("raw array size not a multiple of 8: " + path.string());
  }
  std::vector<double> out(bytes / sizeof(double));
  is.seekg(0);
  is.read(reinterpret_cast<char*>(out.data()),
          static_cast<std::streamsize>(bytes));
  if (!is) throw IoError("read failed: " + path.string());
  return out;
}

void save_checkpoint(const std::filesystem::path& dir, const ModelState& model,
                     const std::vector<std::pair<std::string, Tensor>>& extra,
                     uint64_t seed) {
  std::filesystem::create_directories(dir);
  json manifest;
  manifest["format"] = "infomtl-checkpoint-v1";
  manifest["mode"] = method_name(model.mode);
  manifest["input_dim"] = model.encoder.input_dim;
  manifest["hidden"] = model.encoder.hidden;
  manifest["repr_dim"] = model.encoder.repr_dim;
  manifest["classes"] = model.class_counts;
  manifest["dropout"] = model.encoder.dropout_p;
  manifest["seed"] = seed;

  auto dump_group = [&](const std::vector<std::pair<std::string, Tensor>>& ps,
                        const std::string& prefix) {
    json arr = json::array();
    int idx = 0;
    for (const auto& [name, t] : ps) {
      std::string file = prefix + std::to_string(idx++) + ".bin";
      write_f64_file(dir / file, t.values());
      arr.push_back({{"name", name}, {"shape", t.shape()}, {"file", file}});
    }
    return arr;
  };
  manifest["params"] = dump_group(model.named_parameters(), "p");
  manifest["extra"] = dump_group(extra, "x");

  std::ofstream os(dir / "manifest.json", std::ios::trunc);
  if (!os) throw IoError("cannot write manifest in " + dir.string());
  os << manifest.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw IoError("missing checkpoint manifest: " + dir.string());
  json manifest;
  try {
    is >> manifest;
  } catch (const json::exception& e) {
    throw IoError("bad checkpoint manifest: " + std::string(e.what()));
  }
  if (manifest.value("format", "") != "infomtl-checkpoint-v1") {
    throw IoError("unrecognized checkpoint format in " + dir.string());
  }

  Checkpoint ck;
  ck.seed = manifest.at("seed").get<uint64_t>();
  Method mode = method_from_name(manifest.at("mode").get<std::string>());
  // rebuild with a throwaway init, then overwrite every tensor bitwise
  ck.model = ModelState::create(
      mode, manifest.at("input_dim").get<int>(),
      manifest.at("hidden").get<std::vector<int>>(),
      manifest.at("repr_dim").get<int>(),
      manifest.at("classes").get<std::vector<int>>(),
      manifest.at("dropout").get<double>(), RngStream(0));

  auto params = ck.model.named_parameters();
  const auto& jparams = manifest.at("params");
  IMTL_CHECK(jparams.size() == params.size(),
             "checkpoint: parameter count mismatch");
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& jp = jparams[i];
    IMTL_CHECK(jp.at("name").get<std::string>() == params[i].first,
               "checkpoint: parameter name mismatch at index " +
                   std::to_string(i));
    auto shape = jp.at("shape").get<Shape>();
    IMTL_CHECK(shape == params[i].second.shape(),
               "checkpoint: shape mismatch for " + params[i].first);
    auto vals = read_f64_file(dir / jp.at("file").get<std::string>());
    IMTL_CHECK(vals.size() == params[i].second.values().size(),
               "checkpoint: value count mismatch for " + params[i].first);
    params[i].second.mutable_values() = std::move(vals);
  }

  for (const auto& jx : manifest.at("extra")) {
    auto shape = jx.at("shape").get<Shape>();
    auto vals = read_f64_file(dir / jx.at("file").get<std::string>());
    ck.extra.emplace_back(
        jx.at("name").get<std::string>(),
        Tensor::from_values(shape, std::move(vals), true));
  }
  return ck;
}

}  // namespace infomtl
