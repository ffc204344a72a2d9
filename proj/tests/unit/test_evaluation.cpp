#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "mtgrid/common/error.hpp"
#include "mtgrid/common/rng.hpp"
#include "mtgrid/evaluation/embedding.hpp"
#include "mtgrid/evaluation/metrics.hpp"
#include "mtgrid/evaluation/oracle.hpp"
#include "mtgrid/evaluation/prompts.hpp"
#include "mtgrid/evaluation/suite.hpp"
#include "mtgrid/scene/lexicon.hpp"

using namespace mtgrid;
using namespace mtgrid::eval;
using scene::Cell;
using scene::Relation;
using scene::SceneObject;
using scene::SceneSpec;
using scene::Shape;

namespace {

constexpr PaletteIndex kRed = 1;
constexpr PaletteIndex kGreen = 2;
constexpr PaletteIndex kBlue = 3;

SceneObject object(Shape shape, PaletteIndex color, int row, int col, int size = 4) {
  return SceneObject{shape, color, Cell{row, col}, size};
}

TokenGrid render(std::vector<SceneObject> objects) {
  SceneSpec s;
  s.objects = std::move(objects);
  return scene::render_scene(s);
}

EvalConstraint constraint(Dimension d, std::vector<TargetObject> objects,
                          std::optional<Relation> relation = std::nullopt) {
  return EvalConstraint{d, std::move(objects), relation};
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("mtgrid_eval_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::vector<nlohmann::json> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double norm(const Embedding& e) {
  double s = 0.0;
  for (double v : e) s += v * v;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("detector recovers every rendered object") {
  Rng pick(3);
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    scene::SceneConstraints c;
    c.count = 1 + static_cast<int>(pick.below(scene::kMaxObjects));
    const SceneSpec s = scene::sample_scene(seed, c);
    const auto found = detect_objects(scene::render_scene(s));
    REQUIRE(found.size() == s.objects.size());
    for (const SceneObject& o : s.objects) {
      const auto want = scene::object_centroid(o);
      const auto hit = std::find_if(found.begin(), found.end(), [&](const DetectedObject& d) {
        return std::abs(d.centroid.row - want.row) < 1e-9 && std::abs(d.centroid.col - want.col) < 1e-9;
      });
      REQUIRE(hit != found.end());
      CHECK(hit->shape == o.shape);
      CHECK(hit->color == o.color);
      CHECK(hit->cell_count == static_cast<int>(scene::shape_mask(o.shape, o.size).size()));
      CHECK(hit->row0 == o.anchor.row);
      CHECK(hit->col0 == o.anchor.col);
    }
  }
}

TEST_CASE("detector edge cases") {
  CHECK(detect_objects(TokenGrid()).empty());

  TokenGrid g;
  g.at(0, 0) = kRed;
  g.at(0, 1) = kRed;  // two cells: dropped
  g.at(5, 5) = kBlue;
  g.at(5, 6) = kBlue;
  g.at(5, 7) = kBlue;  // three cells in a row: kept, no template
  g.at(10, 10) = kGreen;
  g.at(11, 11) = kGreen;
  g.at(12, 12) = kGreen;  // diagonal only: not 4-connected
  const auto found = detect_objects(g);
  REQUIRE(found.size() == 1);
  CHECK(found[0].color == kBlue);
  CHECK_FALSE(found[0].shape.has_value());
  CHECK(found[0].cell_count == 3);

  // Two squares of one color touching side by side form a single component.
  TokenGrid touching;
  for (int r = 2; r < 6; ++r) {
    for (int c = 2; c < 10; ++c) touching.at(r, c) = kRed;
  }
  const auto merged = detect_objects(touching);
  REQUIRE(merged.size() == 1);
  CHECK_FALSE(merged[0].shape.has_value());

  // Different colors stay separate even when adjacent.
  TokenGrid pair = touching;
  for (int r = 2; r < 6; ++r) {
    for (int c = 6; c < 10; ++c) pair.at(r, c) = kBlue;
  }
  const auto two = detect_objects(pair);
  REQUIRE(two.size() == 2);
  CHECK(two[0].shape == Shape::square);
  CHECK(two[1].shape == Shape::square);
}

TEST_CASE("templates of equal extent are well separated") {
  struct Template {
    Shape shape;
    int size;
    std::set<std::pair<int, int>> cells;
    scene::Extent extent;
  };
  std::vector<Template> all;
  for (Shape s : scene::kAllShapes) {
    for (int size = scene::kMinObjectSize; size <= scene::kMaxObjectSize; ++size) {
      Template t{s, size, {}, scene::shape_extent(s, size)};
      for (const Cell& c : scene::shape_mask(s, size)) t.cells.insert({c.row, c.col});
      all.push_back(std::move(t));
    }
  }
  for (const auto& a : all) {
    for (const auto& b : all) {
      if (a.shape == b.shape || a.extent.rows != b.extent.rows || a.extent.cols != b.extent.cols) continue;
      int diff = 0;
      for (const auto& c : a.cells) diff += b.cells.count(c) ? 0 : 1;
      for (const auto& c : b.cells) diff += a.cells.count(c) ? 0 : 1;
      CHECK(diff >= 4);
    }
  }
}

TEST_CASE("classification tolerates one flipped cell") {
  for (Shape s : scene::kAllShapes) {
    for (int size = scene::kMinObjectSize; size <= scene::kMaxObjectSize; ++size) {
      const auto mask = scene::shape_mask(s, size);
      CHECK(classify_shape(mask) == s);
      const auto e = scene::shape_extent(s, size);
      for (int r = 0; r < e.rows; ++r) {
        for (int c = 0; c < e.cols; ++c) {
          std::vector<Cell> flipped;
          bool present = false;
          for (const Cell& m : mask) {
            if (m.row == r && m.col == c) {
              present = true;
            } else {
              flipped.push_back(m);
            }
          }
          if (!present) flipped.push_back({r, c});
          int r0 = e.rows, r1 = -1, c0 = e.cols, c1 = -1;
          for (const Cell& m : flipped) {
            r0 = std::min(r0, m.row);
            r1 = std::max(r1, m.row);
            c0 = std::min(c0, m.col);
            c1 = std::max(c1, m.col);
          }
          if (r0 != 0 || c0 != 0 || r1 != e.rows - 1 || c1 != e.cols - 1) continue;
          CHECK(classify_shape(flipped) == s);
        }
      }
    }
  }
  CHECK_FALSE(classify_shape({}).has_value());
}

TEST_CASE("dimension predicates on hand-built scenes") {
  const TokenGrid red_square = render({object(Shape::square, kRed, 2, 2)});
  const auto single = constraint(Dimension::single_object, {{Shape::square, kRed, 1}});
  CHECK(score_prompt(single, red_square).passed());
  CHECK_FALSE(score_prompt(single, render({object(Shape::circle, kRed, 2, 2)})).passed());
  CHECK_FALSE(score_prompt(single, render({object(Shape::square, kBlue, 2, 2)})).passed());
  CHECK_FALSE(score_prompt(single, render({object(Shape::square, kRed, 2, 2),
                                           object(Shape::square, kRed, 9, 9)})).passed());
  CHECK_FALSE(score_prompt(single, TokenGrid()).passed());

  const auto bars = render({object(Shape::bar, kRed, 0, 0), object(Shape::bar, kRed, 3, 0),
                            object(Shape::bar, kRed, 6, 0)});
  CHECK(score_prompt(constraint(Dimension::counting, {{Shape::bar, kRed, 3}}), bars).passed());
  CHECK_FALSE(score_prompt(constraint(Dimension::counting, {{Shape::bar, kRed, 2}}), bars).passed());
  CHECK_FALSE(score_prompt(constraint(Dimension::counting, {{Shape::bar, kBlue, 3}}), bars).passed());

  const auto colors = constraint(Dimension::colors, {{Shape::square, kRed, 1}});
  CHECK(score_prompt(colors, red_square).passed());
  CHECK_FALSE(score_prompt(colors, render({object(Shape::square, kRed, 2, 2),
                                           object(Shape::square, kBlue, 9, 9)})).passed());

  const auto scene2 = render({object(Shape::square, kRed, 6, 0), object(Shape::circle, kBlue, 6, 10)});
  const auto two = constraint(Dimension::two_objects, {{Shape::square, kRed, 1}, {Shape::circle, kBlue, 1}});
  CHECK(score_prompt(two, scene2).passed());
  CHECK_FALSE(score_prompt(two, red_square).passed());

  const auto attr = constraint(Dimension::color_attribute,
                               {{Shape::square, kRed, 1}, {Shape::circle, kBlue, 1}});
  CHECK(score_prompt(attr, scene2).passed());
  const auto swapped = render({object(Shape::square, kBlue, 6, 0), object(Shape::circle, kRed, 6, 10)});
  CHECK_FALSE(score_prompt(attr, swapped).passed());
  const auto swapped_score = score_prompt(two, swapped);
  CHECK(swapped_score.flags[static_cast<std::size_t>(Dimension::two_objects)] == true);
  CHECK(swapped_score.flags[static_cast<std::size_t>(Dimension::color_attribute)] == false);
  CHECK_FALSE(swapped_score.passed());

  const std::vector<TargetObject> pair = {{Shape::square, kRed, 1}, {Shape::circle, kBlue, 1}};
  CHECK(score_prompt(constraint(Dimension::position, pair, Relation::left_of), scene2).passed());
  CHECK_FALSE(score_prompt(constraint(Dimension::position, pair, Relation::right_of), scene2).passed());
  CHECK_FALSE(score_prompt(constraint(Dimension::position, pair, Relation::above), scene2).passed());
}

TEST_CASE("position uses a one-cell dead zone") {
  CHECK(relation_holds(Relation::left_of, {5.0, 3.0}, {5.0, 4.0}));
  CHECK_FALSE(relation_holds(Relation::left_of, {5.0, 3.5}, {5.0, 4.0}));
  CHECK_FALSE(relation_holds(Relation::right_of, {5.0, 3.0}, {5.0, 4.0}));
  CHECK(relation_holds(Relation::above, {2.0, 9.0}, {3.0, 0.0}));
  CHECK(relation_holds(Relation::below, {4.0, 0.0}, {3.0, 0.0}));
  CHECK_FALSE(relation_holds(Relation::below, {3.9, 0.0}, {3.0, 0.0}));
}

TEST_CASE("score flags cover the dimensions a constraint instantiates") {
  const auto s = score_prompt(constraint(Dimension::single_object, {{Shape::square, kRed, 1}}),
                              render({object(Shape::square, kRed, 2, 2)}));
  CHECK(s.flags[static_cast<std::size_t>(Dimension::single_object)] == true);
  CHECK(s.flags[static_cast<std::size_t>(Dimension::colors)] == true);
  CHECK_FALSE(s.flags[static_cast<std::size_t>(Dimension::position)].has_value());
  CHECK_FALSE(s.flags[static_cast<std::size_t>(Dimension::counting)].has_value());
}

TEST_CASE("sampled scenes satisfy the constraints they were drawn for") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    for (Relation rel : {Relation::left_of, Relation::right_of, Relation::above, Relation::below}) {
      scene::SceneConstraints sc;
      sc.count = 2;
      sc.relation = rel;
      const SceneSpec s = scene::sample_scene(seed, sc);
      const auto& a = s.objects[0];
      const auto& b = s.objects[1];
      if (a.shape == b.shape && a.color == b.color) continue;
      const auto c = constraint(Dimension::position, {{a.shape, a.color, 1}, {b.shape, b.color, 1}}, rel);
      CHECK(score_prompt(c, scene::render_scene(s)).passed());
    }
  }
}

TEST_CASE("constraint validation and json round trip") {
  const auto pos = constraint(Dimension::position, {{Shape::square, kRed, 1}, {Shape::ring, kBlue, 1}},
                              Relation::below);
  CHECK_NOTHROW(validate_constraint(pos));
  CHECK(constraint_from_json(constraint_to_json(pos)) == pos);
  const auto cnt = constraint(Dimension::counting, {{Shape::cross, 5, 3}});
  CHECK(constraint_from_json(constraint_to_json(cnt)) == cnt);

  CHECK_THROWS_AS(validate_constraint(constraint(Dimension::position, {{Shape::square, kRed, 1}})),
                  InvalidArgument);
  CHECK_THROWS_AS(validate_constraint(constraint(Dimension::counting, {{Shape::square, kRed, 1}})),
                  InvalidArgument);
  CHECK_THROWS_AS(validate_constraint(constraint(Dimension::single_object, {{Shape::square, 9, 1}})),
                  InvalidArgument);
  CHECK_THROWS_AS(validate_constraint(constraint(Dimension::single_object, {{Shape::square, kRed, 1}},
                                                 Relation::above)),
                  InvalidArgument);
  auto j = constraint_to_json(pos);
  j["objects"][0]["shape"] = "hexagon";
  CHECK_THROWS_AS(constraint_from_json(j), InvalidArgument);
  j = constraint_to_json(pos);
  j["dimension"] = "texture";
  CHECK_THROWS_AS(constraint_from_json(j), InvalidArgument);
  for (Dimension d : kAllDimensions) CHECK(parse_dimension(dimension_name(d)) == d);
}

TEST_CASE("histogram-moment embedding of a uniform grid") {
  const HistogramMomentBackend b;
  const Embedding e = b.embed(TokenGrid(), "");
  REQUIRE(e.size() == 96);
  CHECK(norm(e) == doctest::Approx(1.0));
  // Background fills the grid: fraction 1, centered centroid, variance of
  // 0..15 over (side/2)^2 = 21.25 / 64 on both axes, no covariance.
  const double v = 21.25 / 64.0;
  const double scale = std::sqrt(1.0 + 2.0 * v * v);
  CHECK(e[0] == doctest::Approx(1.0 / scale));
  CHECK(e[16] == doctest::Approx(0.0));
  CHECK(e[17] == doctest::Approx(0.0));
  CHECK(e[48] == doctest::Approx(v / scale));
  CHECK(e[49] == doctest::Approx(v / scale));
  CHECK(e[50] == doctest::Approx(0.0));
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (i != 0 && i != 48 && i != 49) CHECK(e[i] == doctest::Approx(0.0));
  }
}

TEST_CASE("embeddings are unit length and sensitive to layout") {
  const TokenGrid a = render({object(Shape::square, kRed, 0, 0), object(Shape::triangle, kBlue, 9, 3)});
  TokenGrid rotated(a.side, 0);
  for (int r = 0; r < a.side; ++r) {
    for (int c = 0; c < a.side; ++c) rotated.at(a.side - 1 - r, a.side - 1 - c) = a.at(r, c);
  }
  for (const auto& spec : {"histogram-moment", "downsample-raw"}) {
    const auto backend = make_backend(spec);
    CHECK(backend->name() == spec);
    const Embedding ea = backend->embed(a, "x");
    CHECK(ea.size() == backend->dimension());
    CHECK(norm(ea) == doctest::Approx(1.0));
    CHECK(backend->embed(a, "y") == ea);
    CHECK(cosine(ea, backend->embed(a, "z")) == doctest::Approx(1.0));
    CHECK(cosine(ea, backend->embed(rotated, "r")) < 0.999);
  }
  const Embedding d = DownsampleRawBackend().embed(TokenGrid(), "");
  REQUIRE(d.size() == 256);
  for (std::size_t block = 0; block < 16; ++block) CHECK(d[block * 16] == doctest::Approx(0.25));
  CHECK_THROWS_AS(make_backend("pixels"), InvalidArgument);
}

TEST_CASE("external embeddings are looked up by image id") {
  const auto dir = fresh_dir("external");
  {
    std::ofstream f(dir / "vec.jsonl");
    f << R"({"image_id": "a", "vector": [1, 0, 0]})" << "\n"
      << R"({"image_id": "b", "vector": [0, 2, 0]})" << "\n";
  }
  const auto backend = make_backend("external:" + (dir / "vec.jsonl").string());
  CHECK(backend->dimension() == 3);
  CHECK(backend->embed(TokenGrid(), "b") == Embedding{0, 2, 0});
  CHECK_THROWS_AS(backend->embed(TokenGrid(), "c"), InvalidArgument);
  {
    std::ofstream f(dir / "dup.jsonl");
    f << R"({"image_id": "a", "vector": [1, 0]})" << "\n"
      << R"({"image_id": "a", "vector": [0, 1]})" << "\n";
  }
  CHECK_THROWS_AS(ExternalBackend::load(dir / "dup.jsonl"), InvalidArgument);
  {
    std::ofstream f(dir / "dims.jsonl");
    f << R"({"image_id": "a", "vector": [1, 0]})" << "\n"
      << R"({"image_id": "b", "vector": [0, 1, 0]})" << "\n";
  }
  CHECK_THROWS_AS(ExternalBackend::load(dir / "dims.jsonl"), InvalidArgument);
  CHECK_THROWS_AS(ExternalBackend::load(dir / "missing.jsonl"), IoError);
}

TEST_CASE("cosine and cross-lingual scores on hand examples") {
  CHECK(cosine({1, 0}, {0, 1}) == doctest::Approx(0.0));
  CHECK(cosine({1, 1}, {1, 0}) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(cosine({2, 0}, {-1, 0}) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(cosine({1, 0}, {1, 0, 0}), InvalidArgument);
  CHECK_THROWS_AS(cosine({0, 0}, {1, 0}), InvalidArgument);

  CHECK(clc_score({{1, 0}}, {{1, 0}, {0, 1}}) == doctest::Approx(0.5));
  CHECK(clc_score({{1, 0}, {1, 0}}, {{3, 0}}) == doctest::Approx(1.0));
  CHECK(clc_score({{1, 0}}, {{0, 5}}) == doctest::Approx(0.0));
  // Reference pairs never enter the mean.
  CHECK(clc_score({{1, 0}, {0, 1}}, {{1, 0}}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(clc_score({}, {{1, 0}}), InvalidArgument);
  CHECK_THROWS_AS(clc_score({{1, 0}}, {}), InvalidArgument);

  const CssPair p = css_scores({1, 0}, {{1, 0}, {1, 1}}, {{0, 1}});
  CHECK(p.ef == doctest::Approx((1.0 + 1.0 / std::sqrt(2.0)) / 2.0));
  CHECK(p.es == doctest::Approx(0.0));
}

TEST_CASE("cross-lingual score is invariant to scaling and order") {
  Rng rng(8);
  auto vec = [&] {
    Embedding e(5);
    for (double& v : e) v = rng.normal();
    return e;
  };
  std::vector<Embedding> refs, targets;
  for (int i = 0; i < 3; ++i) refs.push_back(vec());
  for (int i = 0; i < 7; ++i) targets.push_back(vec());
  const double base = clc_score(refs, targets);
  auto scaled = targets;
  for (auto& t : scaled) {
    const double k = 0.1 + 10.0 * rng.uniform();
    for (double& v : t) v *= k;
  }
  CHECK(clc_score(refs, scaled) == doctest::Approx(base));
  auto shuffled = targets;
  std::reverse(shuffled.begin(), shuffled.end());
  CHECK(clc_score(refs, shuffled) == doctest::Approx(base));
  CHECK(base <= 1.0);
  CHECK(base >= -1.0);
}

TEST_CASE("summaries interpolate quartiles linearly") {
  const Quartiles q = summarize({4, 1, 3, 2});
  CHECK(q.min == 1.0);
  CHECK(q.q1 == doctest::Approx(1.75));
  CHECK(q.median == doctest::Approx(2.5));
  CHECK(q.q3 == doctest::Approx(3.25));
  CHECK(q.max == 4.0);
  CHECK(q.mean == doctest::Approx(2.5));
  CHECK(q.count == 4);
  const Quartiles one = summarize({0.7});
  CHECK(one.q1 == doctest::Approx(0.7));
  CHECK(one.q3 == doctest::Approx(0.7));
  const Quartiles five = summarize({0, 10, 20, 30, 40});
  CHECK(five.q1 == doctest::Approx(10.0));
  CHECK(five.median == doctest::Approx(20.0));
  CHECK_THROWS_AS(summarize({}), InvalidArgument);
}

TEST_CASE("code-switched prompts split the concept sequence") {
  const auto& lex = scene::LexiconSet::builtin();
  const std::vector<std::string> concepts = {"color.red", "shape.square", "rel.left_of", "color.blue",
                                             "shape.circle"};
  std::vector<Language> targets;
  for (Language l : kAllLanguages) {
    if (l != Language::en) targets.push_back(l);
  }
  const auto prompts = make_code_switch_prompts(concepts, targets, lex);
  REQUIRE(prompts.size() == 2 * targets.size());
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const auto& p = prompts[i];
    CHECK(p.target == targets[i / 2]);
    CHECK(p.variant == (i % 2 == 0 ? CodeSwitchVariant::english_first : CodeSwitchVariant::english_second));
    REQUIRE(p.surfaces.size() == concepts.size());
    std::vector<std::string> first, second;
    for (std::size_t c = 0; c < concepts.size(); ++c) {
      const bool first_half = c < 3;  // ceil(5 / 2)
      const bool english = first_half == (p.variant == CodeSwitchVariant::english_first);
      const Language l = english ? Language::en : p.target;
      CHECK(p.surfaces[c] == lex.at(l).surface(concepts[c]));
      (first_half ? first : second).push_back(p.surfaces[c]);
    }
    const Language l1 = p.variant == CodeSwitchVariant::english_first ? Language::en : p.target;
    const Language l2 = p.variant == CodeSwitchVariant::english_first ? p.target : Language::en;
    CHECK(p.text == scene::join_surfaces(l1, first) + " " + scene::join_surfaces(l2, second));
  }
  CHECK(variant_name(CodeSwitchVariant::english_first) == "EF");
  CHECK(variant_name(CodeSwitchVariant::english_second) == "ES");
  CHECK_THROWS_AS(make_code_switch_prompts(concepts, {Language::en}, lex), InvalidArgument);
  CHECK_THROWS_AS(make_code_switch_prompts({"shape.hexagon"}, {Language::zh}, lex), InvalidArgument);
}

TEST_CASE("prompt set covers every dimension and round trips") {
  const auto& lex = scene::LexiconSet::builtin();
  const UnifiedVocab vocab(lex.surface_table());
  const auto prompts = make_prompt_set(5, 4, lex);
  REQUIRE(prompts.size() == 24);
  std::set<std::string> ids;
  std::array<int, kNumDimensions> per_dim{};
  for (const auto& p : prompts) {
    ids.insert(p.prompt_id);
    per_dim[static_cast<std::size_t>(p.constraint.dimension)] += 1;
    CHECK_NOTHROW(validate_constraint(p.constraint));
    for (Language l : kAllLanguages) CHECK_FALSE(p.text_in(l).empty());
    CHECK(english_concepts(p.text_in(Language::en), vocab, lex) == p.concepts);
    const bool instruct = p.constraint.dimension == Dimension::two_objects ||
                          p.constraint.dimension == Dimension::color_attribute;
    CHECK(p.style == (instruct ? scene::CaptionStyle::instruct : scene::CaptionStyle::detailed));
    if (p.constraint.objects.size() == 2 && p.constraint.dimension != Dimension::position) {
      CHECK(p.constraint.objects[0].shape != p.constraint.objects[1].shape);
    }
  }
  CHECK(ids.size() == prompts.size());
  for (int n : per_dim) CHECK(n == 4);

  const auto again = make_prompt_set(5, 4, lex);
  for (std::size_t i = 0; i < prompts.size(); ++i) CHECK(again[i].text == prompts[i].text);

  const auto dir = fresh_dir("prompts");
  save_prompt_set(prompts, dir / "p.jsonl");
  const auto loaded = load_prompt_set(dir / "p.jsonl");
  REQUIRE(loaded.size() == prompts.size());
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    CHECK(loaded[i].prompt_id == prompts[i].prompt_id);
    CHECK(loaded[i].constraint == prompts[i].constraint);
    CHECK(loaded[i].style == prompts[i].style);
    CHECK(loaded[i].concepts == prompts[i].concepts);
    CHECK(loaded[i].text == prompts[i].text);
  }

  auto lines = read_jsonl(dir / "p.jsonl");
  {
    std::ofstream f(dir / "dup.jsonl");
    f << lines[0].dump() << "\n" << lines[0].dump() << "\n";
  }
  CHECK_THROWS_AS(load_prompt_set(dir / "dup.jsonl"), InvalidArgument);
  lines[0]["text"].erase("zh");
  {
    std::ofstream f(dir / "lang.jsonl");
    f << lines[0].dump() << "\n";
  }
  CHECK_THROWS_AS(load_prompt_set(dir / "lang.jsonl"), InvalidArgument);
  CHECK_THROWS_AS(load_prompt_set(dir / "none.jsonl"), IoError);
}

TEST_CASE("evaluation suite writes consistent reports") {
  const auto& lex = scene::LexiconSet::builtin();
  const UnifiedVocab vocab(lex.surface_table());
  ModelConfig model = make_model_config(vocab, t2i_sequence_length(32, kGridSide * kGridSide), 4);
  model.n_layers = 1;
  model.n_heads = 2;
  model.d_model = 16;
  model.d_ff = 32;
  const Parameters params = init_parameters(model);
  const auto prompts = make_prompt_set(1, 1, lex);

  EvalConfig config;
  config.samples_per_prompt = 2;
  config.sampler.steps = 2;
  config.seed = 9;
  const auto dir = fresh_dir("suite");
  const EvalReport report = run_eval_suite(params, model, vocab, lex, prompts, config, dir / "a");
  for (const char* f : {"generations.jsonl", "compositional.jsonl", "compositional.csv", "clc.jsonl",
                        "css.jsonl", "summary.json", "summary.csv"}) {
    CHECK(std::filesystem::exists(dir / "a" / f));
  }
  CHECK(report.prompt_ids.size() == 6);
  REQUIRE(report.compositional.size() == kNumLanguages);

  // Rates recomputed from the per-image records.
  std::map<std::pair<std::string, std::string>, std::pair<int, int>> tally;
  const auto flags = read_jsonl(dir / "a" / "compositional.jsonl");
  CHECK(flags.size() == 6 * kNumLanguages * 2);
  for (const auto& rec : flags) {
    auto& t = tally[{rec.at("language"), rec.at("dimension")}];
    t.first += rec.at("passed").get<bool>() ? 1 : 0;
    t.second += 1;
  }
  for (const auto& [lang, score] : report.compositional) {
    double sum = 0.0;
    for (Dimension d : kAllDimensions) {
      const auto& t = tally.at({std::string(language_tag(lang)), std::string(dimension_name(d))});
      CHECK(score.trials[static_cast<std::size_t>(d)] == t.second);
      CHECK(score.rate[static_cast<std::size_t>(d)] == doctest::Approx(double(t.first) / t.second));
      sum += double(t.first) / t.second;
    }
    CHECK(score.overall == doctest::Approx(sum / kNumDimensions));
  }

  // Cross-lingual scores recomputed from the stored grids.
  const auto gens = read_jsonl(dir / "a" / "generations.jsonl");
  CHECK(gens.size() == 6 * kNumLanguages * 2 + 6 * 10);
  REQUIRE(report.clc.size() == 2);
  REQUIRE(report.css.size() == 2);
  for (const auto& clc : report.clc) {
    const auto backend = make_backend(clc.backend);
    REQUIRE(clc.per_prompt.size() == 6);
    for (std::size_t pi = 0; pi < 6; ++pi) {
      std::vector<Embedding> refs, targets;
      for (const auto& g : gens) {
        if (g.at("prompt_id") != report.prompt_ids[pi] || g.contains("variant")) continue;
        TokenGrid grid;
        grid.tokens = g.at("grid").get<std::vector<PaletteIndex>>();
        const auto e = backend->embed(grid, g.at("image_id").get<std::string>());
        (g.at("language") == "en" ? refs : targets).push_back(e);
      }
      CHECK(refs.size() == 2);
      CHECK(targets.size() == 10);
      CHECK(clc.per_prompt[pi] == doctest::Approx(clc_score(refs, targets)));
    }
    CHECK(clc.overall == doctest::Approx(summarize(clc.per_prompt).mean));
  }
  const auto summary = nlohmann::json::parse(slurp(dir / "a" / "summary.json"));
  CHECK(summary.at("clc").at("histogram-moment").at("mean").get<double>() ==
        doctest::Approx(report.clc[0].overall));

  // Same seed, more workers: identical output.
  config.workers = 3;
  run_eval_suite(params, model, vocab, lex, prompts, config, dir / "b");
  CHECK(slurp(dir / "a" / "generations.jsonl") == slurp(dir / "b" / "generations.jsonl"));
  CHECK(slurp(dir / "a" / "summary.csv") == slurp(dir / "b" / "summary.csv"));

  auto partial = prompts;
  partial.erase(std::remove_if(partial.begin(), partial.end(),
                               [](const PromptRecord& p) { return p.constraint.dimension == Dimension::counting; }),
                partial.end());
  CHECK_THROWS_AS(run_eval_suite(params, model, vocab, lex, partial, config, dir / "c"), InvalidArgument);
}
