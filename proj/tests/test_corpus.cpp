#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "zrnmt/corpus.hpp"
#include "zrnmt/rng.hpp"
#include "test_util.hpp"

using namespace zrnmt;

namespace {

FeatureGrid noiseless(const Scene& s) {
  Rng rng(0);
  return render_image(s, rng, 0.0);
}

std::vector<std::string> body_tokens(const Sentence& s, const Vocab& v) {
  std::vector<std::string> out;
  for (int i = 0; i + 1 < s.length(); ++i) out.push_back(v.token(s.ids[i]));
  return out;
}

int parse_error_pos(const Sentence& s) {
  int pos = -1;
  CHECK_FALSE(parse_source(s, &pos).has_value());
  return pos;
}

// Body-token helper for hand-built malformed sentences. Uses the public
// vocabulary so the ids stay valid even if the layout changes.
int tok(const std::string& t) { return source_vocab().id(t); }

std::vector<std::string> slurp_lines(const std::string& path) {
  std::ifstream is(path);
  REQUIRE(is.good());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) lines.push_back(line);
  return lines;
}

void spit_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream os(path);
  for (const std::string& l : lines) os << l << "\n";
}

std::string load_error(const std::string& path) {
  try {
    load_corpus(path);
  } catch (const std::runtime_error& e) {
    return e.what();
  }
  FAIL("expected load_corpus to throw");
  return {};
}

}  // namespace

TEST_CASE("scene generation is seed-deterministic and well-formed") {
  Rng a(42), b(42);
  for (int i = 0; i < 50; ++i) CHECK(generate_scene(a) == generate_scene(b));

  Rng rng(7);
  bool count_seen[kMaxObjects + 1] = {};
  std::set<int> shapes, colors, positions;
  for (int i = 0; i < 2000; ++i) {
    const Scene s = generate_scene(rng);
    REQUIRE(s.objects.size() >= 1);
    REQUIRE(s.objects.size() <= static_cast<std::size_t>(kMaxObjects));
    count_seen[s.objects.size()] = true;
    std::set<int> used;
    for (const SceneObject& o : s.objects) {
      CHECK((o.shape >= 0 && o.shape < kNumShapes));
      CHECK((o.color >= 0 && o.color < kNumColors));
      CHECK((o.position >= 0 && o.position < kNumPositions));
      CHECK(used.insert(o.position).second);  // positions distinct within a scene
      shapes.insert(o.shape);
      colors.insert(o.color);
      positions.insert(o.position);
    }
  }
  for (int k = 1; k <= kMaxObjects; ++k) CHECK(count_seen[k]);
  CHECK(shapes.size() == kNumShapes);
  CHECK(colors.size() == kNumColors);
  CHECK(positions.size() == kNumPositions);
}

TEST_CASE("the two grammars share no surface tokens and use opposite orders") {
  CHECK(source_vocab().size() == 3 + kNumColors + kNumShapes + kNumPositions + 1);  // 27
  CHECK(target_vocab().size() == 27);
  std::set<std::string> src_tokens, tgt_tokens;
  for (int i = 3; i < source_vocab().size(); ++i) src_tokens.insert(source_vocab().token(i));
  for (int i = 3; i < target_vocab().size(); ++i) tgt_tokens.insert(target_vocab().token(i));
  CHECK(src_tokens.size() == 24);
  CHECK(tgt_tokens.size() == 24);
  for (const std::string& t : src_tokens) CHECK(tgt_tokens.count(t) == 0);

  // One object: source is color-shape-position, target prefixes each object
  // with its function word and reverses the attribute order.
  const Scene s{{SceneObject{2, 5, 7}}};
  CHECK(body_tokens(render_source(s), source_vocab()) ==
        std::vector<std::string>{"ven", "gon", "she"});
  CHECK(body_tokens(render_target(s), target_vocab()) ==
        std::vector<std::string>{"ka", "pre", "kanu", "fos"});

  // Two objects: source joins with "um", target repeats its marker.
  const Scene s2{{SceneObject{0, 0, 0}, SceneObject{6, 6, 8}}};
  CHECK(body_tokens(render_source(s2), source_vocab()) ==
        std::vector<std::string>{"rok", "dap", "sa", "um", "hax", "pex", "shi"});
  CHECK(body_tokens(render_target(s2), target_vocab()) ==
        std::vector<std::string>{"ka", "pa", "taku", "adi", "ka", "pri", "welo", "gul"});
}

TEST_CASE("rendered sentences stay within the length budget and round-trip") {
  // Exhaustive single-object sweep.
  std::set<std::vector<int>> src_seen, tgt_seen;
  for (int sh = 0; sh < kNumShapes; ++sh)
    for (int c = 0; c < kNumColors; ++c)
      for (int p = 0; p < kNumPositions; ++p) {
        const Scene s{{SceneObject{sh, c, p}}};
        const Sentence x = render_source(s);
        const Sentence y = render_target(s);
        REQUIRE(x.length() == 4);
        REQUIRE(y.length() == 5);
        CHECK(well_formed(x, kTMax, source_vocab().size()));
        CHECK(well_formed(y, kTMax, target_vocab().size()));
        CHECK(src_seen.insert(x.ids).second);
        CHECK(tgt_seen.insert(y.ids).second);
        const auto back = parse_source(x);
        REQUIRE(back.has_value());
        CHECK(*back == s);
        CHECK(oracle_translate(x) == y);
      }
  CHECK(src_seen.size() == 441);

  // Random multi-object scenes: lengths are 4k for the source and 4k+1 for
  // the target, both inside kTMax at the three-object maximum.
  Rng rng(11);
  for (int i = 0; i < 400; ++i) {
    const Scene s = generate_scene(rng);
    const int k = static_cast<int>(s.objects.size());
    const Sentence x = render_source(s);
    const Sentence y = render_target(s);
    CHECK(x.length() == 4 * k);
    CHECK(y.length() == 4 * k + 1);
    CHECK(x.length() <= kTMax);
    CHECK(y.length() <= kTMax);
    const auto back = parse_source(x);
    REQUIRE(back.has_value());
    CHECK(*back == s);
    CHECK(oracle_translate(x) == y);
  }
}

TEST_CASE("distinct scenes render to distinct sentences on both sides") {
  Rng rng(13);
  std::set<std::vector<int>> scenes_seen, src_seen, tgt_seen;
  for (int i = 0; i < 1500; ++i) {
    const Scene s = generate_scene(rng);
    std::vector<int> key;
    for (const SceneObject& o : s.objects) {
      key.push_back(o.shape);
      key.push_back(o.color);
      key.push_back(o.position);
    }
    const bool fresh = scenes_seen.insert(key).second;
    CHECK(src_seen.insert(render_source(s).ids).second == fresh);
    CHECK(tgt_seen.insert(render_target(s).ids).second == fresh);
  }
}

TEST_CASE("source parsing reports the first offending token") {
  // Position of the violation, by construction of each sentence.
  CHECK(parse_error_pos(Sentence{{kEosId}}) == 0);                       // empty body
  CHECK(parse_error_pos(make_sentence({tok("rok")}, kTMax)) == 1);       // missing shape
  CHECK(parse_error_pos(make_sentence({tok("rok"), tok("dap")}, kTMax)) == 2);  // missing position
  CHECK(parse_error_pos(make_sentence({tok("dap"), tok("rok"), tok("sa")}, kTMax)) == 0);
  CHECK(parse_error_pos(make_sentence({tok("rok"), tok("dap"), tok("sa"), tok("zel")}, kTMax)) ==
        3);  // neither EOS nor the join word after a triple
  CHECK(parse_error_pos(make_sentence({tok("rok"), tok("dap"), tok("sa"), tok("um")}, kTMax)) ==
        4);  // join word with nothing after it
  {
    // A fourth object is rejected at the join word that would introduce it.
    std::vector<int> body;
    for (int i = 0; i < 4; ++i) {
      if (i > 0) body.push_back(tok("um"));
      body.push_back(tok("rok"));
      body.push_back(tok("dap"));
      body.push_back(source_vocab().id(i == 0 ? "sa" : i == 1 ? "se" : i == 2 ? "si" : "so"));
    }
    CHECK(parse_error_pos(make_sentence(std::move(body), kTMax)) == 11);
  }
  {
    // Tokens after a valid EOS position.
    Sentence s = make_sentence({tok("rok"), tok("dap"), tok("sa")}, kTMax);
    s.ids.insert(s.ids.end(), {tok("zel"), kEosId});
    CHECK(parse_error_pos(s) == 4);
  }

  try {
    oracle_translate(make_sentence({tok("rok"), tok("dap")}, kTMax));
    FAIL("expected a throw");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("token 2") != std::string::npos);
  }
}

TEST_CASE("feature grids are deterministic and structured per channel") {
  const Scene s{{SceneObject{3, 1, 4}}};  // center cell block
  const FeatureGrid a = noiseless(s);
  const FeatureGrid b = noiseless(s);
  CHECK(a.values.v == b.values.v);

  // Only the object's shape channel, color channel, and the presence channel
  // are populated; they carry identical spatial patterns.
  for (int cell = 0; cell < kGridLocations; ++cell) {
    for (int ch = 0; ch < kGridDim; ++ch) {
      const double v = a.values(cell, ch);
      if (ch == 3 || ch == kNumShapes + 1 || ch == kNumShapes + kNumColors) {
        CHECK(v > 0.0);
        CHECK(v <= 1.0);
      } else {
        CHECK(v == 0.0);
      }
    }
    CHECK(a.values(cell, 3) == a.values(cell, kNumShapes + 1));
    CHECK(a.values(cell, 3) == a.values(cell, kNumShapes + kNumColors));
  }

  // Same noise seed, same grid; different seeds differ.
  Rng n1(99), n2(99), n3(100);
  const Scene multi{{SceneObject{0, 0, 0}, SceneObject{5, 2, 8}}};
  const FeatureGrid g1 = render_image(multi, n1, 0.05);
  const FeatureGrid g2 = render_image(multi, n2, 0.05);
  const FeatureGrid g3 = render_image(multi, n3, 0.05);
  CHECK(g1.values.v == g2.values.v);
  CHECK(g1.values.v != g3.values.v);

  CHECK_THROWS_AS(render_image(multi, n1, -0.1), std::invalid_argument);
  Scene too_many;
  for (int i = 0; i < 4; ++i) too_many.objects.push_back(SceneObject{0, 0, i});
  CHECK_THROWS_AS(render_image(too_many, n1, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(render_source(too_many), std::invalid_argument);
  CHECK_THROWS_AS(render_source(Scene{}), std::invalid_argument);
  CHECK_THROWS_AS(render_target(Scene{{SceneObject{7, 0, 0}}}), std::invalid_argument);
}

TEST_CASE("noiseless grids decode back to their scene exactly") {
  // Every single-object scene.
  for (int sh = 0; sh < kNumShapes; ++sh)
    for (int c = 0; c < kNumColors; ++c)
      for (int p = 0; p < kNumPositions; ++p) {
        const Scene s{{SceneObject{sh, c, p}}};
        CHECK(testutil::decode_grid(noiseless(s)) == s);
      }

  // Random multi-object scenes.
  Rng rng(17);
  int multi = 0;
  while (multi < 300) {
    const Scene s = generate_scene(rng);
    if (s.objects.size() < 2) continue;
    ++multi;
    CHECK(testutil::decode_grid(noiseless(s)) == s);
  }

  // Worst-case overlap: identical attributes in adjacent cells.
  const Scene tight{{SceneObject{4, 4, 0}, SceneObject{4, 4, 1}, SceneObject{4, 4, 3}}};
  CHECK(testutil::decode_grid(noiseless(tight)) == tight);
  const Scene row{{SceneObject{2, 6, 3}, SceneObject{2, 6, 4}, SceneObject{2, 6, 5}}};
  CHECK(testutil::decode_grid(noiseless(row)) == row);
}

TEST_CASE("decoding stays exact below the documented noise threshold") {
  REQUIRE(kDefaultNoiseSigma < kNoiseRecoveryThreshold);
  struct Setting {
    double sigma;
    int scenes;
    std::uint64_t seed;
  };
  // 0.055 sits just under the documented threshold; larger scales start to
  // produce spurious detections at the center position (see the threshold
  // comment in the corpus header).
  for (const Setting& cfg : {Setting{kDefaultNoiseSigma, 300, 501}, Setting{0.055, 300, 502}}) {
    Rng scene_rng(cfg.seed);
    Rng noise_rng(Rng::derive(cfg.seed, 1));
    int failures = 0;
    for (int i = 0; i < cfg.scenes; ++i) {
      const Scene s = generate_scene(scene_rng);
      const FeatureGrid z = render_image(s, noise_rng, cfg.sigma);
      if (!(testutil::decode_grid(z) == s)) ++failures;
    }
    INFO("sigma ", cfg.sigma);
    CHECK(failures == 0);
  }
}

TEST_CASE("split generation is pure and keeps the test scenes unseen") {
  const CorpusSplit c = make_splits(50, 9, kDefaultNoiseSigma);
  CHECK(c == make_splits(50, 9, kDefaultNoiseSigma));
  CHECK_FALSE(c == make_splits(50, 10, kDefaultNoiseSigma));

  CHECK(c.d_zx.size() == 50);
  CHECK(c.d_zy.size() == 50);
  CHECK(c.d_zx_val.size() == 8);   // max(8, 50/10)
  CHECK(c.d_zy_val.size() == 8);
  CHECK(c.test_pairs.size() == 16);  // max(16, 50/5)
  CHECK(c.noise_sigma == kDefaultNoiseSigma);

  const CorpusSplit big = make_splits(200, 9, 0.0);
  CHECK(big.d_zx_val.size() == 20);
  CHECK(big.test_pairs.size() == 40);

  // Image ids are sequential and disjoint across sections, in section order.
  int id = 0;
  std::set<std::vector<int>> train_scenes;
  for (const auto* docs : {&c.d_zx, &c.d_zy, &c.d_zx_val, &c.d_zy_val}) {
    for (const Document& d : *docs) {
      CHECK(d.image_id == id++);
      train_scenes.insert(render_source(d.scene).ids);
      // Text and features are regenerable from the stored scene and seed.
      CHECK(d.text == (d.language == Language::kSource ? render_source(d.scene)
                                                       : render_target(d.scene)));
      Rng noise(d.noise_seed);
      CHECK(d.features.values.v == render_image(d.scene, noise, c.noise_sigma).values.v);
    }
  }
  for (const Document& d : c.d_zx) CHECK(d.language == Language::kSource);
  for (const Document& d : c.d_zy) CHECK(d.language == Language::kTarget);

  std::set<std::vector<int>> test_srcs;
  for (const auto& [src, tgt] : c.test_pairs) {
    CHECK(test_srcs.insert(src.ids).second);       // pairwise distinct
    CHECK(train_scenes.count(src.ids) == 0);       // unseen in training or validation
    CHECK(oracle_translate(src) == tgt);           // pairs are oracle-consistent
  }

  CHECK_THROWS_AS(make_splits(0, 1, 0.05), std::invalid_argument);
}

TEST_CASE("corpus files round-trip and reject tampering with a location") {
  const std::string path = "/tmp/zrnmt_corpus_test.txt";
  const CorpusSplit c = make_splits(12, 3, kDefaultNoiseSigma);
  save_corpus(c, path);
  CHECK(load_corpus(path) == c);

  // Saving twice yields identical bytes.
  const std::vector<std::string> lines = slurp_lines(path);
  save_corpus(c, path + ".again");
  CHECK(slurp_lines(path + ".again") == lines);

  // Unknown token on the first document line (line 4).
  {
    std::vector<std::string> bad = lines;
    const auto pos = bad[3].rfind(' ');
    bad[3] = bad[3].substr(0, pos) + " qqq";
    spit_lines(path, bad);
    const std::string err = load_error(path);
    CHECK(err.find(":4:") != std::string::npos);
    CHECK(err.find("unknown token") != std::string::npos);
  }

  // A valid but wrong token: the stored text must match the stored scene.
  {
    std::vector<std::string> bad = lines;
    std::istringstream ss(bad[3]);
    std::vector<std::string> parts;
    std::string w;
    while (ss >> w) parts.push_back(w);
    // Last field is a source token; swap it for a different position word.
    parts.back() = parts.back() == "sa" ? "se" : "sa";
    std::string rebuilt;
    for (std::size_t i = 0; i < parts.size(); ++i) rebuilt += (i ? " " : "") + parts[i];
    bad[3] = rebuilt;
    spit_lines(path, bad);
    const std::string err = load_error(path);
    CHECK(err.find(":4:") != std::string::npos);
    CHECK(err.find("does not match") != std::string::npos);
  }

  // Wrong grammar version in the header.
  {
    std::vector<std::string> bad = lines;
    bad[1] = "grid 16 16 grammar 2 noise_sigma 0x1p-4";
    spit_lines(path, bad);
    CHECK(load_error(path).find("grammar") != std::string::npos);
  }

  // Truncated file.
  {
    std::vector<std::string> bad(lines.begin(), lines.begin() + 5);
    spit_lines(path, bad);
    CHECK(load_error(path).find("unexpected end of file") != std::string::npos);
  }

  CHECK_THROWS_AS(load_corpus("/tmp/zrnmt_no_such_corpus.txt"), std::runtime_error);
}
