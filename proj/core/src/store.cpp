#include "lga/store.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lga/blob_io.hpp"
#include "lga/error.hpp"

namespace lga {

std::optional<std::size_t> FeatureStore::text_phase_count() const {
  if (text.empty()) return std::nullopt;
  return text.begin()->second.phase_count();
}

void FeatureStore::validate() const {
  if (dim == 0) fail(ErrorKind::invalid_data, "store dim must be positive");
  for (const auto& [id, v] : videos) {
    if (v.dim() != dim) {
      throw Error(ErrorKind::dim_mismatch, "video '" + id + "' has dim " + std::to_string(v.dim()) +
                                               ", store dim is " + std::to_string(dim));
    }
    validate_frames(v);
    if (!v.class_id || !classes.contains(*v.class_id)) {
      throw Error(ErrorKind::dangling_reference,
                  "video '" + id + "' references unknown class id " +
                      (v.class_id ? std::to_string(*v.class_id) : std::string("<none>")));
    }
  }
  std::optional<std::size_t> phases;
  for (const auto& [cid, t] : text) {
    if (!classes.contains(cid)) {
      throw Error(ErrorKind::dangling_reference, "text anatomy for unknown class id " + std::to_string(cid));
    }
    if (t.dim() != dim) {
      throw Error(ErrorKind::dim_mismatch, "text anatomy of class " + std::to_string(cid) + " has dim " +
                                               std::to_string(t.dim()));
    }
    if (phases && *phases != t.phase_count()) {
      fail(ErrorKind::invalid_data, "text anatomies disagree on phase count (" + std::to_string(*phases) +
                                        " vs " + std::to_string(t.phase_count()) + ")");
    }
    phases = t.phase_count();
    if (!t.phase_embeddings.all_finite()) {
      fail(ErrorKind::invalid_data, "text anatomy of class " + std::to_string(cid) + " is not finite");
    }
  }
}

namespace {

template <class T>
T field(const nlohmann::json& obj, const char* key, const std::string& file, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw Error(ErrorKind::invalid_data, where + " is missing \"" + key + "\"", file);
  }
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::invalid_data, where + " has a malformed \"" + key + "\"", file);
  }
}

}  // namespace

FeatureStore load_store(const std::filesystem::path& manifest) {
  const std::string file = manifest.string();
  std::ifstream in(manifest, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open manifest", file);
  std::stringstream buf;
  buf << in.rdbuf();
  const auto j = nlohmann::json::parse(buf.str(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorKind::invalid_data, "manifest is not a JSON object", file);

  const auto version = field<int>(j, "version", file, "manifest");
  if (version != kManifestVersion) {
    throw Error(ErrorKind::invalid_data, "unsupported manifest version " + std::to_string(version), file);
  }
  FeatureStore store;
  store.manifest_path = manifest;
  store.dim = field<std::size_t>(j, "dim", file, "manifest");
  if (store.dim == 0) throw Error(ErrorKind::invalid_data, "manifest dim must be positive", file);
  const auto base = manifest.parent_path();

  const auto classes = j.value("classes", nlohmann::json::array());
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const auto& c = classes[i];
    const std::string where = "classes[" + std::to_string(i) + "]";
    const int id = field<int>(c, "id", file, where);
    if (!store.classes.emplace(id, field<std::string>(c, "label", file, where)).second) {
      throw Error(ErrorKind::invalid_data, "duplicate class id " + std::to_string(id), file);
    }
    if (!c.contains("text_blob") || c["text_blob"].is_null()) continue;
    const auto blob_path = base / field<std::string>(c, "text_blob", file, where);
    const bool has_label = c.value("text_has_label_embedding", false);
    Matrix m = read_feature_blob(blob_path);
    if (m.cols() != store.dim) {
      throw Error(ErrorKind::dim_mismatch,
                  "text blob has " + std::to_string(m.cols()) + " columns, store dim is " +
                      std::to_string(store.dim),
                  blob_path.string(), 10);
    }
    TextAnatomy t;
    t.class_id = id;
    std::size_t first = 0;
    if (has_label) {
      if (m.rows() < 2) {
        throw Error(ErrorKind::invalid_data, "text blob flagged with a label embedding needs >= 2 rows",
                    blob_path.string(), 6);
      }
      const auto r0 = m.row(0);
      t.label_embedding = std::vector<double>(r0.begin(), r0.end());
      first = 1;
    }
    t.phase_embeddings = Matrix(m.rows() - first, m.cols());
    for (std::size_t r = first; r < m.rows(); ++r) {
      const auto src = m.row(r);
      std::copy(src.begin(), src.end(), t.phase_embeddings.row(r - first).begin());
    }
    store.text.emplace(id, std::move(t));
  }

  const auto videos = j.value("videos", nlohmann::json::array());
  for (std::size_t i = 0; i < videos.size(); ++i) {
    const auto& v = videos[i];
    const std::string where = "videos[" + std::to_string(i) + "]";
    FrameFeatures f;
    f.video_id = field<std::string>(v, "id", file, where);
    const int cid = field<int>(v, "class_id", file, where);
    if (!store.classes.contains(cid)) {
      throw Error(ErrorKind::dangling_reference,
                  "video '" + f.video_id + "' references unknown class id " + std::to_string(cid), file);
    }
    f.class_id = cid;
    const auto blob_path = base / field<std::string>(v, "blob", file, where);
    f.frames = read_feature_blob(blob_path);
    if (f.frames.cols() != store.dim) {
      throw Error(ErrorKind::dim_mismatch,
                  "blob has " + std::to_string(f.frames.cols()) + " columns, store dim is " +
                      std::to_string(store.dim),
                  blob_path.string(), 10);
    }
    if (v.contains("frames")) {
      const auto frames = field<std::size_t>(v, "frames", file, where);
      if (frames != f.frames.rows()) {
        throw Error(ErrorKind::dim_mismatch,
                    "manifest says " + std::to_string(frames) + " frames, blob has " +
                        std::to_string(f.frames.rows()),
                    blob_path.string(), 6);
      }
    }
    if (f.frames.rows() == 0) throw Error(ErrorKind::invalid_data, "video has no frames", blob_path.string());
    const auto id = f.video_id;
    if (!store.videos.emplace(id, std::move(f)).second) {
      throw Error(ErrorKind::invalid_data, "duplicate video id '" + id + "'", file);
    }
  }

  try {
    store.validate();
  } catch (const Error& e) {
    throw Error(e.kind(), e.what(), file);
  }
  return store;
}

std::filesystem::path save_store(const FeatureStore& store, const std::filesystem::path& dir) {
  store.validate();
  std::filesystem::create_directories(dir / "videos");
  if (!store.text.empty()) std::filesystem::create_directories(dir / "text");

  auto numbered = [](const char* folder, std::size_t n) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.lgaf", n);
    return std::string(folder) + "/" + name;
  };

  nlohmann::ordered_json j;
  j["version"] = kManifestVersion;
  j["dim"] = store.dim;
  j["classes"] = nlohmann::ordered_json::array();
  for (const auto& [cid, label] : store.classes) {
    nlohmann::ordered_json c;
    c["id"] = cid;
    c["label"] = label;
    if (const auto it = store.text.find(cid); it != store.text.end()) {
      const auto& t = it->second;
      const auto rel = numbered("text", static_cast<std::size_t>(j["classes"].size()));
      Matrix m = t.phase_embeddings;
      if (t.label_embedding) {
        m = Matrix(t.phase_count() + 1, t.dim());
        std::copy(t.label_embedding->begin(), t.label_embedding->end(), m.row(0).begin());
        for (std::size_t r = 0; r < t.phase_count(); ++r) {
          const auto src = t.phase_embeddings.row(r);
          std::copy(src.begin(), src.end(), m.row(r + 1).begin());
        }
      }
      write_feature_blob(dir / rel, m);
      c["text_blob"] = rel;
      c["text_has_label_embedding"] = t.label_embedding.has_value();
    }
    j["classes"].push_back(std::move(c));
  }
  j["videos"] = nlohmann::ordered_json::array();
  std::size_t n = 0;
  for (const auto& [id, v] : store.videos) {
    const auto rel = numbered("videos", n++);
    write_feature_blob(dir / rel, v.frames);
    nlohmann::ordered_json e;
    e["id"] = id;
    e["class_id"] = *v.class_id;
    e["blob"] = rel;
    e["frames"] = v.frames.rows();
    j["videos"].push_back(std::move(e));
  }
  const auto manifest = dir / "manifest.json";
  std::ofstream out(manifest, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write manifest", manifest.string());
  out << j.dump(2) << '\n';
  return manifest;
}

}  // namespace lga
