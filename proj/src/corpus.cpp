#include "zrnmt/corpus.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "zrnmt/rng.hpp"

namespace zrnmt {

namespace {

const std::vector<std::string> kSrcColors = {"rok", "zel", "bur", "mik", "tal", "ven", "hax"};
const std::vector<std::string> kSrcShapes = {"dap", "ful", "gon", "kip", "lum", "nor", "pex"};
const std::vector<std::string> kSrcPositions = {"sa", "se", "si", "so", "su",
                                                "sy", "sha", "she", "shi"};
const std::string kSrcJoin = "um";

const std::vector<std::string> kTgtColors = {"adi", "belu", "cor", "dun", "eki", "fos", "gul"};
const std::vector<std::string> kTgtShapes = {"taku", "miro", "kanu", "pelo", "sodu", "ravi", "welo"};
const std::vector<std::string> kTgtPositions = {"pa", "pe", "pi", "po", "pu",
                                                "py", "pra", "pre", "pri"};
const std::string kTgtJoin = "ka";

// Vocab layout on both sides: reserved ids, colors, shapes, positions, join
// word. All id arithmetic below relies on this order.
constexpr int kColorBase = 3;
constexpr int kShapeBase = kColorBase + kNumColors;
constexpr int kPositionBase = kShapeBase + kNumShapes;
constexpr int kJoinId = kPositionBase + kNumPositions;

std::vector<std::string> vocab_tokens(const std::vector<std::string>& colors,
                                      const std::vector<std::string>& shapes,
                                      const std::vector<std::string>& positions,
                                      const std::string& join) {
  std::vector<std::string> out = colors;
  out.insert(out.end(), shapes.begin(), shapes.end());
  out.insert(out.end(), positions.begin(), positions.end());
  out.push_back(join);
  return out;
}

void check_scene(const Scene& s) {
  if (s.objects.empty() || static_cast<int>(s.objects.size()) > kMaxObjects)
    throw std::invalid_argument("scene: object count out of [1,3]");
  for (const SceneObject& o : s.objects) {
    if (o.shape < 0 || o.shape >= kNumShapes || o.color < 0 || o.color >= kNumColors ||
        o.position < 0 || o.position >= kNumPositions)
      throw std::invalid_argument("scene: attribute out of range");
  }
}

constexpr double kBumpSigma = 0.45;   // spatial spread of one object, in cells
constexpr int kPresenceChannel = kNumShapes + kNumColors;  // 14

double object_weight(int index) { return 1.0 - 0.25 * index; }

[[noreturn]] void corpus_format_error(const std::string& path, int line, const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

const Vocab& source_vocab() {
  static const Vocab v(vocab_tokens(kSrcColors, kSrcShapes, kSrcPositions, kSrcJoin));
  return v;
}

const Vocab& target_vocab() {
  static const Vocab v(vocab_tokens(kTgtColors, kTgtShapes, kTgtPositions, kTgtJoin));
  return v;
}

Scene generate_scene(Rng& rng) {
  Scene s;
  const int count = 1 + static_cast<int>(rng.below(kMaxObjects));
  bool used[kNumPositions] = {};
  for (int i = 0; i < count; ++i) {
    SceneObject o;
    o.shape = static_cast<int>(rng.below(kNumShapes));
    o.color = static_cast<int>(rng.below(kNumColors));
    do {
      o.position = static_cast<int>(rng.below(kNumPositions));
    } while (used[o.position]);
    used[o.position] = true;
    s.objects.push_back(o);
  }
  return s;
}

Sentence render_source(const Scene& scene) {
  check_scene(scene);
  std::vector<int> body;
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    if (i > 0) body.push_back(kJoinId);
    const SceneObject& o = scene.objects[i];
    body.push_back(kColorBase + o.color);
    body.push_back(kShapeBase + o.shape);
    body.push_back(kPositionBase + o.position);
  }
  return make_sentence(std::move(body), kTMax);
}

Sentence render_target(const Scene& scene) {
  check_scene(scene);
  std::vector<int> body;
  for (const SceneObject& o : scene.objects) {
    body.push_back(kJoinId);
    body.push_back(kPositionBase + o.position);
    body.push_back(kShapeBase + o.shape);
    body.push_back(kColorBase + o.color);
  }
  return make_sentence(std::move(body), kTMax);
}

std::optional<Scene> parse_source(const Sentence& x, int* err_pos) {
  const std::vector<int>& ids = x.ids;
  const int n = static_cast<int>(ids.size());
  const auto fail = [err_pos](int pos) -> std::optional<Scene> {
    if (err_pos) *err_pos = pos;
    return std::nullopt;
  };
  const auto in_range = [&ids, n](int i, int base, int count) {
    return i < n && ids[i] >= base && ids[i] < base + count;
  };

  Scene scene;
  int i = 0;
  while (true) {
    if (!in_range(i, kColorBase, kNumColors)) return fail(i);
    if (!in_range(i + 1, kShapeBase, kNumShapes)) return fail(i + 1);
    if (!in_range(i + 2, kPositionBase, kNumPositions)) return fail(i + 2);
    scene.objects.push_back(SceneObject{ids[i + 1] - kShapeBase, ids[i] - kColorBase,
                                        ids[i + 2] - kPositionBase});
    const int next = i + 3;
    if (next >= n) return fail(next);
    if (ids[next] == kEosId) {
      if (next != n - 1) return fail(next + 1);
      break;
    }
    if (ids[next] != kJoinId) return fail(next);
    if (static_cast<int>(scene.objects.size()) >= kMaxObjects) return fail(next);
    i = next + 1;
  }
  return scene;
}

Sentence oracle_translate(const Sentence& x) {
  int pos = 0;
  std::optional<Scene> scene = parse_source(x, &pos);
  if (!scene)
    throw std::invalid_argument("oracle_translate: not a source sentence (violation at token " +
                                std::to_string(pos) + ")");
  return render_target(*scene);
}

FeatureGrid render_image(const Scene& scene, Rng& rng, double noise_sigma) {
  check_scene(scene);
  if (noise_sigma < 0.0) throw std::invalid_argument("render_image: noise_sigma must be >= 0");
  Tensor t(kGridLocations, kGridDim);
  for (std::size_t k = 0; k < scene.objects.size(); ++k) {
    const SceneObject& o = scene.objects[k];
    const double w = object_weight(static_cast<int>(k));
    const double cy = (o.position / 3) * 1.5;
    const double cx = (o.position % 3) * 1.5;
    for (int gr = 0; gr < kGridSide; ++gr) {
      for (int gc = 0; gc < kGridSide; ++gc) {
        const double d2 = (gr - cy) * (gr - cy) + (gc - cx) * (gc - cx);
        const double g = w * std::exp(-d2 / (2.0 * kBumpSigma * kBumpSigma));
        const int cell = gr * kGridSide + gc;
        t(cell, o.shape) += g;
        t(cell, kNumShapes + o.color) += g;
        t(cell, kPresenceChannel) += g;
      }
    }
  }
  for (double& x : t.v) x += rng.normal(0.0, noise_sigma);
  return FeatureGrid{std::move(t)};
}

namespace {

Document make_document(int image_id, const Scene& scene, Language lang, std::uint64_t noise_seed,
                       double noise_sigma) {
  Document d;
  d.image_id = image_id;
  d.scene = scene;
  d.noise_seed = noise_seed;
  d.language = lang;
  Rng noise(noise_seed);
  d.features = render_image(scene, noise, noise_sigma);
  d.text = lang == Language::kSource ? render_source(scene) : render_target(scene);
  return d;
}

std::vector<int> scene_key(const Scene& s) {
  std::vector<int> k;
  for (const SceneObject& o : s.objects) {
    k.push_back(o.shape);
    k.push_back(o.color);
    k.push_back(o.position);
  }
  return k;
}

}  // namespace

CorpusSplit make_splits(int n_per_side, std::uint64_t seed, double noise_sigma) {
  if (n_per_side < 1) throw std::invalid_argument("make_splits: n_per_side must be >= 1");
  const int n_val = std::max(8, n_per_side / 10);
  const int n_test = std::max(16, n_per_side / 5);

  Rng scene_rng(Rng::derive(seed, 1));
  Rng noise_rng(Rng::derive(seed, 2));
  Rng test_rng(Rng::derive(seed, 3));

  const int n_train_val = 2 * n_per_side + 2 * n_val;
  std::vector<Scene> scenes;
  scenes.reserve(n_train_val);
  std::set<std::vector<int>> seen;
  for (int i = 0; i < n_train_val; ++i) {
    scenes.push_back(generate_scene(scene_rng));
    seen.insert(scene_key(scenes.back()));
  }

  CorpusSplit c;
  c.noise_sigma = noise_sigma;
  int id = 0;
  const auto take = [&](std::vector<Document>& out, int count, Language lang) {
    for (int i = 0; i < count; ++i, ++id)
      out.push_back(make_document(id, scenes[id], lang, noise_rng.bits(), noise_sigma));
  };
  take(c.d_zx, n_per_side, Language::kSource);
  take(c.d_zy, n_per_side, Language::kTarget);
  take(c.d_zx_val, n_val, Language::kSource);
  take(c.d_zy_val, n_val, Language::kTarget);

  std::set<std::vector<int>> test_seen;
  while (static_cast<int>(c.test_pairs.size()) < n_test) {
    Scene s = generate_scene(test_rng);
    const std::vector<int> key = scene_key(s);
    if (seen.count(key) || test_seen.count(key)) continue;
    test_seen.insert(key);
    c.test_pairs.emplace_back(render_source(s), render_target(s));
  }
  return c;
}

bool operator==(const Document& a, const Document& b) {
  return a.image_id == b.image_id && a.features.values.rows == b.features.values.rows &&
         a.features.values.cols == b.features.values.cols &&
         a.features.values.v == b.features.values.v && a.text == b.text &&
         a.language == b.language && a.scene == b.scene && a.noise_seed == b.noise_seed;
}

bool operator==(const CorpusSplit& a, const CorpusSplit& b) {
  return a.d_zx == b.d_zx && a.d_zy == b.d_zy && a.d_zx_val == b.d_zx_val &&
         a.d_zy_val == b.d_zy_val && a.test_pairs == b.test_pairs &&
         a.noise_sigma == b.noise_sigma;
}

namespace {

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", x);
  return buf;
}

void write_tokens(std::ostream& os, const Sentence& s, const Vocab& v) {
  // Token list without the final EOS; EOS is implied by the format.
  os << " " << (s.length() - 1);
  for (int i = 0; i + 1 < s.length(); ++i) os << " " << v.token(s.ids[i]);
}

void write_docs(std::ostream& os, const std::string& name, const std::vector<Document>& docs) {
  os << "docs " << name << " " << docs.size() << "\n";
  for (const Document& d : docs) {
    os << "doc " << d.image_id << " " << (d.language == Language::kSource ? "src" : "tgt") << " "
       << d.noise_seed << " " << d.scene.objects.size();
    for (const SceneObject& o : d.scene.objects)
      os << " " << o.shape << " " << o.color << " " << o.position;
    write_tokens(os, d.text, d.language == Language::kSource ? source_vocab() : target_vocab());
    os << "\n";
  }
}

class LineReader {
public:
  LineReader(std::istream& is, std::string path) : is_(is), path_(std::move(path)) {}

  std::istringstream next(const std::string& expected_head) {
    std::string line;
    if (!std::getline(is_, line)) corpus_format_error(path_, line_no_ + 1, "unexpected end of file");
    ++line_no_;
    std::istringstream ss(line);
    std::string head;
    if (!(ss >> head) || head != expected_head)
      corpus_format_error(path_, line_no_, "expected '" + expected_head + "' record");
    return ss;
  }

  [[noreturn]] void fail(const std::string& what) { corpus_format_error(path_, line_no_, what); }

private:
  std::istream& is_;
  std::string path_;
  int line_no_ = 0;
};

Sentence read_tokens(std::istringstream& ss, const Vocab& v, LineReader& r) {
  int n = 0;
  if (!(ss >> n) || n < 0) r.fail("bad token count");
  std::vector<int> body;
  for (int i = 0; i < n; ++i) {
    std::string tok;
    if (!(ss >> tok)) r.fail("missing token");
    if (!v.contains(tok)) r.fail("unknown token '" + tok + "'");
    body.push_back(v.id(tok));
  }
  return make_sentence(std::move(body), kTMax);
}

std::vector<Document> read_docs(LineReader& r, const std::string& name, double noise_sigma) {
  std::istringstream head = r.next("docs");
  std::string got;
  std::size_t count = 0;
  if (!(head >> got >> count) || got != name) r.fail("expected docs section '" + name + "'");
  std::vector<Document> docs;
  for (std::size_t i = 0; i < count; ++i) {
    std::istringstream ss = r.next("doc");
    int image_id = 0, k = 0;
    std::string lang;
    std::uint64_t noise_seed = 0;
    if (!(ss >> image_id >> lang >> noise_seed >> k)) r.fail("bad doc record");
    if (lang != "src" && lang != "tgt") r.fail("bad language '" + lang + "'");
    if (k < 1 || k > kMaxObjects) r.fail("bad object count");
    Scene scene;
    for (int j = 0; j < k; ++j) {
      SceneObject o;
      if (!(ss >> o.shape >> o.color >> o.position)) r.fail("bad scene triple");
      scene.objects.push_back(o);
    }
    const Language language = lang == "src" ? Language::kSource : Language::kTarget;
    Document d = make_document(image_id, scene, language, noise_seed, noise_sigma);
    const Sentence text =
        read_tokens(ss, language == Language::kSource ? source_vocab() : target_vocab(), r);
    if (!(text == d.text)) r.fail("token list does not match the stored scene");
    docs.push_back(std::move(d));
  }
  return docs;
}

}  // namespace

void save_corpus(const CorpusSplit& c, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_corpus: cannot open " + path);
  os << "zrcorpus v1\n";
  os << "grid " << kGridLocations << " " << kGridDim << " grammar " << kGrammarVersion
     << " noise_sigma " << format_double(c.noise_sigma) << "\n";
  write_docs(os, "d_zx", c.d_zx);
  write_docs(os, "d_zy", c.d_zy);
  write_docs(os, "d_zx_val", c.d_zx_val);
  write_docs(os, "d_zy_val", c.d_zy_val);
  os << "pairs " << c.test_pairs.size() << "\n";
  for (const auto& [src, tgt] : c.test_pairs) {
    os << "pair";
    write_tokens(os, src, source_vocab());
    write_tokens(os, tgt, target_vocab());
    os << "\n";
  }
  if (!os) throw std::runtime_error("save_corpus: write failed for " + path);
}

CorpusSplit load_corpus(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_corpus: cannot open " + path);
  LineReader r(is, path);

  r.next("zrcorpus");  // "zrcorpus v1"; version checked loosely by the grid line
  std::istringstream grid = r.next("grid");
  int locations = 0, dim = 0, grammar = 0;
  std::string kw1, kw2;
  std::string sigma_text;
  if (!(grid >> locations >> dim >> kw1 >> grammar >> kw2 >> sigma_text) || kw1 != "grammar" ||
      kw2 != "noise_sigma")
    r.fail("bad grid header");
  if (locations != kGridLocations || dim != kGridDim) r.fail("unsupported grid shape");
  if (grammar != kGrammarVersion) r.fail("unsupported grammar version");

  CorpusSplit c;
  c.noise_sigma = std::strtod(sigma_text.c_str(), nullptr);
  c.d_zx = read_docs(r, "d_zx", c.noise_sigma);
  c.d_zy = read_docs(r, "d_zy", c.noise_sigma);
  c.d_zx_val = read_docs(r, "d_zx_val", c.noise_sigma);
  c.d_zy_val = read_docs(r, "d_zy_val", c.noise_sigma);

  std::istringstream pairs = r.next("pairs");
  std::size_t count = 0;
  if (!(pairs >> count)) r.fail("bad pairs header");
  for (std::size_t i = 0; i < count; ++i) {
    std::istringstream ss = r.next("pair");
    Sentence src = read_tokens(ss, source_vocab(), r);
    Sentence tgt = read_tokens(ss, target_vocab(), r);
    c.test_pairs.emplace_back(std::move(src), std::move(tgt));
  }
  return c;
}

}  // namespace zrnmt
