#include "tutorqa/corpus.hpp"

#include <algorithm>
#include <set>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "tutorqa/error.hpp"
#include "tutorqa/util.hpp"

namespace tutorqa {

using nlohmann::json;

bool CorpusManifest::has_version(std::string_view id) const {
  return std::any_of(versions.begin(), versions.end(),
                     [&](const GameVersion& v) { return v.id == id; });
}

std::filesystem::path CorpusManifest::resolve_image(const FrameCase& frame) const {
  std::filesystem::path p(frame.image_path);
  return p.is_absolute() ? p : base_dir / p;
}

std::vector<const FrameCase*> CorpusManifest::tutorial_frames(std::string_view version,
                                                              int tutorial) const {
  std::vector<const FrameCase*> out;
  for (const auto& f : frames) {
    if (f.version == version && f.tutorial == tutorial) out.push_back(&f);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const FrameCase* a, const FrameCase* b) { return a->ordinal < b->ordinal; });
  return out;
}

std::vector<int> CorpusManifest::tutorials(std::string_view version) const {
  std::set<int> ids;
  for (const auto& f : frames) {
    if (f.version == version) ids.insert(f.tutorial);
  }
  return {ids.begin(), ids.end()};
}

const FrameCase* CorpusManifest::find_frame(std::string_view frame_id) const {
  for (const auto& f : frames) {
    if (f.frame_id == frame_id) return &f;
  }
  return nullptr;
}

std::size_t CorpusManifest::question_count(std::string_view version) const {
  std::size_t n = 0;
  for (const auto& f : frames) {
    if (f.version == version) n += f.qa_pairs.size();
  }
  return n;
}

std::string to_string(const Diagnostic& d) {
  std::string ctx;
  if (!d.frame_id.empty()) ctx += fmt::format("frame {}", d.frame_id);
  if (!d.question_id.empty()) {
    ctx += fmt::format("{}question {}", ctx.empty() ? "" : ", ", d.question_id);
  }
  return ctx.empty() ? d.message : fmt::format("{} [{}]", d.message, ctx);
}

namespace {

template <typename T>
T required(const json& obj, const char* key, std::string_view where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(fmt::format("{}: missing key '{}'", where, key));
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("{}: key '{}' has wrong type ({})", where, key, e.what()));
  }
}

}  // namespace

CorpusManifest parse_manifest(const json& doc, std::filesystem::path base_dir) {
  if (!doc.is_object()) throw ParseError("manifest: top level must be an object");
  CorpusManifest m;
  m.base_dir = std::move(base_dir);

  for (const auto& v : required<json>(doc, "versions", "manifest")) {
    if (!v.is_object()) throw ParseError("manifest: version entries must be objects");
    m.versions.push_back({required<std::string>(v, "id", "version"),
                          v.value("description", std::string{})});
  }
  for (const auto& f : required<json>(doc, "frames", "manifest")) {
    if (!f.is_object()) throw ParseError("manifest: frame entries must be objects");
    FrameCase fc;
    fc.frame_id = required<std::string>(f, "frame_id", "frame");
    const auto where = fmt::format("frame {}", fc.frame_id);
    fc.tutorial = required<int>(f, "tutorial", where);
    fc.version = required<std::string>(f, "version", where);
    fc.image_path = required<std::string>(f, "image", where);
    fc.ordinal = required<int>(f, "ordinal", where);
    for (const auto& q : required<json>(f, "questions", where)) {
      fc.qa_pairs.push_back({required<std::string>(q, "id", where),
                             required<std::string>(q, "question", where),
                             required<std::string>(q, "expected_answer", where)});
    }
    m.frames.push_back(std::move(fc));
  }
  if (auto it = doc.find("metadata"); it != doc.end()) {
    if (!it->is_object()) throw ParseError("manifest: metadata must be an object");
    for (const auto& [k, v] : it->items()) {
      m.metadata[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
  }
  return m;
}

json to_json(const CorpusManifest& m) {
  json versions = json::array();
  for (const auto& v : m.versions) versions.push_back({{"id", v.id}, {"description", v.description}});
  json frames = json::array();
  for (const auto& f : m.frames) {
    json qs = json::array();
    for (const auto& q : f.qa_pairs) {
      qs.push_back({{"id", q.question_id}, {"question", q.question},
                    {"expected_answer", q.expected_answer}});
    }
    frames.push_back({{"frame_id", f.frame_id}, {"tutorial", f.tutorial}, {"version", f.version},
                      {"image", f.image_path}, {"ordinal", f.ordinal}, {"questions", qs}});
  }
  json meta = json::object();
  for (const auto& [k, v] : m.metadata) meta[k] = v;
  return {{"versions", versions}, {"frames", frames}, {"metadata", meta}};
}

CorpusManifest load_manifest(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
  }
  auto manifest = parse_manifest(doc, path.parent_path());
  if (auto diags = validate_corpus(manifest); !diags.empty()) {
    throw ValidationError(to_string(diags.front()));
  }
  return manifest;
}

void save_manifest(const CorpusManifest& manifest, const std::filesystem::path& path) {
  write_file_atomic(path, to_json(manifest).dump(2) + "\n");
}

std::vector<Diagnostic> validate_corpus(const CorpusManifest& m) {
  std::vector<Diagnostic> out;

  std::unordered_set<std::string> version_ids;
  for (const auto& v : m.versions) {
    if (v.id.empty()) {
      out.push_back({"", "", "version with empty id"});
    } else if (!version_ids.insert(v.id).second) {
      out.push_back({"", "", fmt::format("duplicate version id {}", v.id)});
    }
  }

  std::unordered_set<std::string> frame_ids;
  std::unordered_map<std::string, std::unordered_set<std::string>> question_ids;  // per version
  std::set<std::tuple<std::string, int, int>> ordinals;
  for (const auto& f : m.frames) {
    if (f.frame_id.empty()) out.push_back({"", "", "frame with empty frame_id"});
    if (!frame_ids.insert(f.frame_id).second) out.push_back({f.frame_id, "", "duplicate frame id"});
    if (!version_ids.contains(f.version)) {
      out.push_back({f.frame_id, "", fmt::format("unknown version {}", f.version)});
    }
    if (f.tutorial < 1) {
      out.push_back({f.frame_id, "", fmt::format("tutorial id {} must be >= 1", f.tutorial)});
    }
    if (!ordinals.emplace(f.version, f.tutorial, f.ordinal).second) {
      out.push_back({f.frame_id, "",
                     fmt::format("duplicate ordinal {} in version {} tutorial {}", f.ordinal,
                                 f.version, f.tutorial)});
    }
    if (f.image_path.empty()) {
      out.push_back({f.frame_id, "", "frame has no image path"});
    } else {
      const auto img = m.resolve_image(f);
      std::error_code ec;
      if (!std::filesystem::is_regular_file(img, ec)) {
        out.push_back({f.frame_id, "", fmt::format("image not found: {}", f.image_path)});
      }
    }
    if (f.qa_pairs.empty()) {
      out.push_back({f.frame_id, "", fmt::format("frame {} has no questions", f.frame_id)});
    }
    auto& seen = question_ids[f.version];
    for (const auto& q : f.qa_pairs) {
      if (q.question_id.empty()) {
        out.push_back({f.frame_id, "", "question with empty id"});
        continue;
      }
      if (!seen.insert(q.question_id).second) {
        out.push_back({f.frame_id, q.question_id,
                       fmt::format("duplicate question id in version {}", f.version)});
      }
      if (q.question.empty()) out.push_back({f.frame_id, q.question_id, "empty question text"});
      if (q.expected_answer.empty()) {
        out.push_back({f.frame_id, q.question_id, "empty expected answer"});
      }
    }
  }
  return out;
}

std::vector<CommonQuestion> common_questions(const CorpusManifest& m, std::string_view a,
                                             std::string_view b) {
  for (auto id : {a, b}) {
    if (!m.has_version(id)) throw ValidationError(fmt::format("unknown version {}", id));
  }
  struct Located {
    const QAPair* qa;
    int tutorial;
    int ordinal;
  };
  std::unordered_map<std::string, const QAPair*> in_b;
  std::vector<Located> in_a;
  for (const auto& f : m.frames) {
    for (const auto& q : f.qa_pairs) {
      if (f.version == a) in_a.push_back({&q, f.tutorial, f.ordinal});
      if (f.version == b) in_b.emplace(q.question_id, &q);
    }
  }
  std::sort(in_a.begin(), in_a.end(), [](const Located& x, const Located& y) {
    return std::tie(x.tutorial, x.ordinal, x.qa->question_id) <
           std::tie(y.tutorial, y.ordinal, y.qa->question_id);
  });
  std::vector<CommonQuestion> out;
  for (const auto& loc : in_a) {
    if (auto it = in_b.find(loc.qa->question_id); it != in_b.end()) {
      out.push_back({loc.qa->question_id, *loc.qa, *it->second});
    }
  }
  return out;
}

}  // namespace tutorqa
