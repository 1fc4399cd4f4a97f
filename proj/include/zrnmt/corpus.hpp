#ifndef ZRNMT_CORPUS_HPP
#define ZRNMT_CORPUS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "zrnmt/models.hpp"
#include "zrnmt/vocab.hpp"

namespace zrnmt {

// Synthetic world: a scene is 1-3 objects, each a (shape, color, position)
// triple. Positions within one scene are distinct so every object owns a
// grid cell. The same scene renders to a noisy feature grid, to a source-
// language sentence, and to a target-language sentence, which is what makes
// an exact translation oracle possible.
struct SceneObject {
  int shape = 0;
  int color = 0;
  int position = 0;
  bool operator==(const SceneObject& o) const = default;
};

struct Scene {
  std::vector<SceneObject> objects;
  bool operator==(const Scene& o) const = default;
};

inline constexpr int kNumShapes = 7;
inline constexpr int kNumColors = 7;
inline constexpr int kNumPositions = 9;  // 3x3 coarse placement
inline constexpr int kMaxObjects = 3;
inline constexpr int kGridSide = 4;                          // grid is 4x4 cells
inline constexpr int kGridLocations = kGridSide * kGridSide;  // L
inline constexpr int kGridDim = 16;                           // D channels
inline constexpr int kGrammarVersion = 1;
inline constexpr int kTMax = 20;  // longest sentence either grammar can emit, with slack
inline constexpr double kDefaultNoiseSigma = 0.05;
// Below this noise scale the per-cell decoding oracle recovers scenes
// exactly; see the corpus tests. The binding constraint is the 3x3 center
// placement, whose spatial bump has the least energy in the 4x4 grid and so
// the largest least-squares coefficient variance.
inline constexpr double kNoiseRecoveryThreshold = 0.06;

enum class Language { kSource, kTarget };

struct Document {
  int image_id = 0;
  FeatureGrid features;
  Sentence text;
  Language language = Language::kSource;
  // Generative record: features == render_image(scene, Rng(noise_seed), sigma).
  Scene scene;
  std::uint64_t noise_seed = 0;
};

struct CorpusSplit {
  std::vector<Document> d_zx;      // image + source text
  std::vector<Document> d_zy;      // image + target text
  std::vector<Document> d_zx_val;
  std::vector<Document> d_zy_val;
  std::vector<std::pair<Sentence, Sentence>> test_pairs;  // (source, target)
  double noise_sigma = kDefaultNoiseSigma;
};

class Rng;

Scene generate_scene(Rng& rng);

// Fixed-order vocabularies: reserved ids, colors, shapes, positions, then
// the grammar's function word.
const Vocab& source_vocab();
const Vocab& target_vocab();

// Source grammar: color shape position per object, objects joined by "um".
// Target grammar: "ka" position shape color per object, concatenated.
Sentence render_source(const Scene& scene);
Sentence render_target(const Scene& scene);

// Inverse of render_source. On failure returns nullopt and sets *err_pos to
// the index of the first offending token.
std::optional<Scene> parse_source(const Sentence& x, int* err_pos = nullptr);

// render_target(parse(x)); throws std::invalid_argument naming the position
// of the first violation when x is not a source-grammar sentence.
Sentence oracle_translate(const Sentence& x);

FeatureGrid render_image(const Scene& scene, Rng& rng, double noise_sigma);

CorpusSplit make_splits(int n_per_side, std::uint64_t seed, double noise_sigma);

void save_corpus(const CorpusSplit& c, const std::string& path);
CorpusSplit load_corpus(const std::string& path);

bool operator==(const Document& a, const Document& b);
bool operator==(const CorpusSplit& a, const CorpusSplit& b);

}  // namespace zrnmt

#endif
