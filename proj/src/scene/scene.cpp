#include "mtgrid/scene/scene.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mtgrid/common/error.hpp"
#include "mtgrid/common/rng.hpp"

namespace mtgrid::scene {
namespace {

constexpr std::array<std::string_view, kNumShapes> kShapeNames = {
    "square", "circle", "triangle", "cross", "ring", "bar"};
constexpr std::array<std::string_view, kNumObjectColors> kColorNames = {
    "red", "green", "blue", "yellow", "purple", "orange", "white"};
constexpr std::array<std::string_view, 4> kRelationNames = {
    "left_of", "right_of", "above", "below"};

struct Box {
  int row0, col0, row1, col1;  // inclusive
};

Box bounding_box(const SceneObject& object) {
  const Extent e = shape_extent(object.shape, object.size);
  return {object.anchor.row, object.anchor.col, object.anchor.row + e.rows - 1,
          object.anchor.col + e.cols - 1};
}

// True when the boxes overlap or touch (no free cell between them).
bool boxes_too_close(const Box& a, const Box& b) {
  return a.row0 <= b.row1 + 1 && b.row0 <= a.row1 + 1 &&
         a.col0 <= b.col1 + 1 && b.col0 <= a.col1 + 1;
}

bool is_object_color(PaletteIndex c) {
  return c >= kFirstObjectColor && c <= kLastObjectColor;
}

Shape random_shape(Rng& rng) {
  return kAllShapes[rng.below(kNumShapes)];
}

PaletteIndex random_color(Rng& rng) {
  return static_cast<PaletteIndex>(kFirstObjectColor +
                                   rng.below(kNumObjectColors));
}

int sample_object_count(Rng& rng, int minimum) {
  // 1: 30%, 2: 40%, 3: 20%, 4: 10%, renormalized over [minimum, 4].
  constexpr std::array<double, kMaxObjects> kWeights = {0.3, 0.4, 0.2, 0.1};
  double total = 0.0;
  for (int n = minimum; n <= kMaxObjects; ++n) total += kWeights[n - 1];
  double u = rng.uniform() * total;
  for (int n = minimum; n <= kMaxObjects; ++n) {
    u -= kWeights[n - 1];
    if (u < 0.0) return n;
  }
  return kMaxObjects;
}

void check_constraints(const SceneConstraints& c) {
  if (c.count) {
    if (*c.count > kMaxObjects) {
      throw InvalidArgument("count exceeds maximum (" + std::to_string(*c.count) +
                            " > " + std::to_string(kMaxObjects) + ")");
    }
    if (*c.count < 1) {
      throw InvalidArgument("count below minimum (" + std::to_string(*c.count) +
                            " < 1)");
    }
    if (c.objects.size() > static_cast<std::size_t>(*c.count)) {
      throw InvalidArgument("objects: more object targets than count");
    }
  }
  if (c.objects.size() > static_cast<std::size_t>(kMaxObjects)) {
    throw InvalidArgument("objects: more object targets than the maximum count");
  }
  for (const auto& o : c.objects) {
    if (o.color && !is_object_color(*o.color)) {
      throw InvalidArgument("color: palette index " + std::to_string(*o.color) +
                            " is not an object color");
    }
  }
  if (c.relation) {
    if (c.identical) {
      throw InvalidArgument("relation: not satisfiable for identical objects");
    }
    if (c.count && *c.count < 2) {
      throw InvalidArgument("relation: requires at least two objects");
    }
  }
  if (c.identical) {
    if (c.count && *c.count < 2) {
      throw InvalidArgument("identical: requires at least two objects");
    }
    for (std::size_t i = 1; i < c.objects.size(); ++i) {
      const auto& a = c.objects[0];
      const auto& b = c.objects[i];
      if ((a.shape && b.shape && *a.shape != *b.shape) ||
          (a.color && b.color && *a.color != *b.color)) {
        throw InvalidArgument("identical: object targets disagree");
      }
    }
  } else {
    for (std::size_t i = 0; i < c.objects.size(); ++i) {
      for (std::size_t j = i + 1; j < c.objects.size(); ++j) {
        const auto& a = c.objects[i];
        const auto& b = c.objects[j];
        if (a.shape && b.shape && a.color && b.color && *a.shape == *b.shape &&
            *a.color == *b.color) {
          throw InvalidArgument("objects: distinct objects share shape and color");
        }
      }
    }
  }
}

}  // namespace

std::string_view shape_name(Shape shape) {
  return kShapeNames[static_cast<std::size_t>(shape)];
}

std::optional<Shape> parse_shape(std::string_view name) {
  for (std::size_t i = 0; i < kShapeNames.size(); ++i) {
    if (kShapeNames[i] == name) return static_cast<Shape>(i);
  }
  return std::nullopt;
}

std::string_view color_name(PaletteIndex color) {
  if (!is_object_color(color)) {
    throw InvalidArgument("palette index " + std::to_string(color) +
                          " is not an object color");
  }
  return kColorNames[color - kFirstObjectColor];
}

std::optional<PaletteIndex> parse_color(std::string_view name) {
  for (std::size_t i = 0; i < kColorNames.size(); ++i) {
    if (kColorNames[i] == name) {
      return static_cast<PaletteIndex>(kFirstObjectColor + i);
    }
  }
  return std::nullopt;
}

std::string_view relation_name(Relation relation) {
  return kRelationNames[static_cast<std::size_t>(relation)];
}

std::optional<Relation> parse_relation(std::string_view name) {
  for (std::size_t i = 0; i < kRelationNames.size(); ++i) {
    if (kRelationNames[i] == name) return static_cast<Relation>(i);
  }
  return std::nullopt;
}

Extent shape_extent(Shape shape, int size) {
  if (shape == Shape::bar) return {1, size};
  return {size, size};
}

std::vector<Cell> shape_mask(Shape shape, int size) {
  if (size < kMinObjectSize || size > kMaxObjectSize) {
    throw InvalidArgument("object size " + std::to_string(size) +
                          " outside [" + std::to_string(kMinObjectSize) + ", " +
                          std::to_string(kMaxObjectSize) + "]");
  }
  std::vector<Cell> cells;
  const Extent e = shape_extent(shape, size);
  const double center = (size - 1) / 2.0;
  const double radius_sq = (size / 2.0) * (size / 2.0);
  const int mid = size / 2;
  for (int r = 0; r < e.rows; ++r) {
    for (int c = 0; c < e.cols; ++c) {
      bool on = false;
      switch (shape) {
        case Shape::square:
        case Shape::bar:
          on = true;
          break;
        case Shape::circle: {
          const double dr = r - center;
          const double dc = c - center;
          on = dr * dr + dc * dc <= radius_sq;
          break;
        }
        case Shape::triangle:
          on = c <= r;
          break;
        case Shape::cross:
          on = r == mid || c == mid;
          break;
        case Shape::ring:
          on = r == 0 || c == 0 || r == size - 1 || c == size - 1;
          break;
      }
      if (on) cells.push_back({r, c});
    }
  }
  return cells;
}

Centroid object_centroid(const SceneObject& object) {
  const auto cells = shape_mask(object.shape, object.size);
  double r = 0.0;
  double c = 0.0;
  for (const Cell& cell : cells) {
    r += cell.row;
    c += cell.col;
  }
  const double n = static_cast<double>(cells.size());
  return {object.anchor.row + r / n, object.anchor.col + c / n};
}

std::optional<Relation> relation_between(const Centroid& a, const Centroid& b) {
  const double dc = b.col - a.col;
  const double dr = b.row - a.row;
  if (std::abs(dc) < 1.0 && std::abs(dr) < 1.0) return std::nullopt;
  if (std::abs(dc) >= std::abs(dr)) {
    return dc > 0.0 ? Relation::left_of : Relation::right_of;
  }
  return dr > 0.0 ? Relation::above : Relation::below;
}

void validate_scene(const SceneSpec& scene) {
  if (scene.grid_size <= 0) throw InvalidArgument("scene grid_size must be positive");
  if (scene.background_color >= kCodebookSize) {
    throw InvalidArgument("scene background color outside the codebook");
  }
  if (scene.objects.size() > static_cast<std::size_t>(kMaxObjects)) {
    throw InvalidArgument("scene has " + std::to_string(scene.objects.size()) +
                          " objects, maximum is " + std::to_string(kMaxObjects));
  }
  std::vector<Box> boxes;
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const SceneObject& o = scene.objects[i];
    const std::string where = "object " + std::to_string(i) + ": ";
    if (!is_object_color(o.color) || o.color == scene.background_color) {
      throw InvalidArgument(where + "color " + std::to_string(o.color) +
                            " is not a valid object color");
    }
    if (o.size < kMinObjectSize || o.size > kMaxObjectSize) {
      throw InvalidArgument(where + "size " + std::to_string(o.size) +
                            " outside the allowed range");
    }
    const Box b = bounding_box(o);
    if (b.row0 < 0 || b.col0 < 0 || b.row1 >= scene.grid_size ||
        b.col1 >= scene.grid_size) {
      throw InvalidArgument(where + "bounding box leaves the grid");
    }
    for (std::size_t j = 0; j < boxes.size(); ++j) {
      if (boxes_too_close(boxes[j], b)) {
        throw InvalidArgument(where + "overlaps or touches object " +
                              std::to_string(j));
      }
    }
    boxes.push_back(b);
  }
}

SceneSpec sample_scene(std::uint64_t rng_seed, const SceneConstraints& constraints) {
  check_constraints(constraints);
  Rng rng(mix_seed({rng_seed, 0x5ce9e}));

  int minimum = std::max<int>(1, static_cast<int>(constraints.objects.size()));
  if (constraints.relation || constraints.identical) minimum = std::max(minimum, 2);
  const int n = constraints.count ? *constraints.count : sample_object_count(rng, minimum);
  const bool identical =
      constraints.identical ||
      (!constraints.count && !constraints.relation && constraints.objects.size() <= 1 &&
       n >= 2 && rng.uniform() < 0.35);

  SceneSpec scene;
  scene.objects.resize(static_cast<std::size_t>(n));
  if (identical) {
    std::optional<Shape> shape;
    std::optional<PaletteIndex> color;
    for (const auto& o : constraints.objects) {
      if (o.shape) shape = o.shape;
      if (o.color) color = o.color;
    }
    const Shape s = shape ? *shape : random_shape(rng);
    const PaletteIndex c = color ? *color : random_color(rng);
    for (auto& o : scene.objects) {
      o.shape = s;
      o.color = c;
    }
  } else {
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
      const ObjectConstraint target =
          i < constraints.objects.size() ? constraints.objects[i] : ObjectConstraint{};
      for (int attempt = 0;; ++attempt) {
        const Shape s = target.shape ? *target.shape : random_shape(rng);
        const PaletteIndex c = target.color ? *target.color : random_color(rng);
        const bool duplicate = std::any_of(
            scene.objects.begin(), scene.objects.begin() + static_cast<std::ptrdiff_t>(i),
            [&](const SceneObject& p) { return p.shape == s && p.color == c; });
        if (!duplicate) {
          scene.objects[i].shape = s;
          scene.objects[i].color = c;
          break;
        }
        if (attempt > 1000) {
          throw InvalidArgument("objects: cannot make object " + std::to_string(i) +
                                " distinct from earlier objects");
        }
      }
    }
  }

  for (int restart = 0; restart < 1000; ++restart) {
    std::vector<Box> boxes;
    bool placed_all = true;
    for (auto& o : scene.objects) {
      bool placed = false;
      for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
        o.size = kMinObjectSize +
                 static_cast<int>(rng.below(kMaxObjectSize - kMinObjectSize + 1));
        const Extent e = shape_extent(o.shape, o.size);
        o.anchor.row = static_cast<int>(rng.below(static_cast<std::uint64_t>(scene.grid_size - e.rows + 1)));
        o.anchor.col = static_cast<int>(rng.below(static_cast<std::uint64_t>(scene.grid_size - e.cols + 1)));
        const Box b = bounding_box(o);
        placed = std::none_of(boxes.begin(), boxes.end(),
                              [&](const Box& other) { return boxes_too_close(other, b); });
        if (placed) boxes.push_back(b);
      }
      if (!placed) {
        placed_all = false;
        break;
      }
    }
    if (!placed_all) continue;
    if (constraints.relation) {
      const auto rel = relation_between(object_centroid(scene.objects[0]),
                                        object_centroid(scene.objects[1]));
      if (rel != constraints.relation) continue;
    }
    return scene;
  }
  throw Error("sample_scene: could not place objects without overlap");
}

TokenGrid render_scene(const SceneSpec& scene) {
  validate_scene(scene);
  TokenGrid grid(scene.grid_size, scene.background_color);
  for (const SceneObject& o : scene.objects) {
    for (const Cell& cell : shape_mask(o.shape, o.size)) {
      grid.at(o.anchor.row + cell.row, o.anchor.col + cell.col) = o.color;
    }
  }
  return grid;
}

std::vector<ObjectGroup> group_objects(const SceneSpec& scene) {
  std::vector<ObjectGroup> groups;
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const SceneObject& o = scene.objects[i];
    auto it = std::find_if(groups.begin(), groups.end(), [&](const ObjectGroup& g) {
      return g.shape == o.shape && g.color == o.color;
    });
    if (it == groups.end()) {
      groups.push_back({o.shape, o.color, 0, {}});
      it = groups.end() - 1;
    }
    ++it->count;
    it->members.push_back(i);
  }
  return groups;
}

}  // namespace mtgrid::scene
