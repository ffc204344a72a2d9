#include "mtgrid/evaluation/oracle.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "mtgrid/common/error.hpp"

namespace mtgrid::eval {

using scene::Cell;
using scene::Shape;

std::optional<Shape> classify_shape(const std::vector<Cell>& cells) {
  if (cells.empty()) return std::nullopt;
  int r0 = cells[0].row, r1 = r0, c0 = cells[0].col, c1 = c0;
  for (const Cell& c : cells) {
    r0 = std::min(r0, c.row);
    r1 = std::max(r1, c.row);
    c0 = std::min(c0, c.col);
    c1 = std::max(c1, c.col);
  }
  const int rows = r1 - r0 + 1;
  const int cols = c1 - c0 + 1;
  std::set<std::pair<int, int>> have;
  for (const Cell& c : cells) have.insert({c.row - r0, c.col - c0});

  std::optional<Shape> best;
  int best_diff = kShapeTolerance + 1;
  for (Shape shape : scene::kAllShapes) {
    for (int size = scene::kMinObjectSize; size <= scene::kMaxObjectSize; ++size) {
      const auto e = scene::shape_extent(shape, size);
      if (e.rows != rows || e.cols != cols) continue;
      int diff = 0;
      std::set<std::pair<int, int>> want;
      for (const Cell& c : scene::shape_mask(shape, size)) want.insert({c.row, c.col});
      for (const auto& w : want) diff += have.count(w) ? 0 : 1;
      for (const auto& h : have) diff += want.count(h) ? 0 : 1;
      if (diff < best_diff) {
        best_diff = diff;
        best = shape;
      }
    }
  }
  return best;
}

std::vector<DetectedObject> detect_objects(const TokenGrid& grid) {
  validate_grid(grid);
  const int side = grid.side;
  std::vector<char> seen(static_cast<std::size_t>(side * side), 0);
  std::vector<DetectedObject> out;
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const PaletteIndex color = grid.at(r, c);
      if (color == scene::kBackground || seen[static_cast<std::size_t>(r * side + c)]) continue;
      std::vector<Cell> cells;
      std::vector<Cell> stack{{r, c}};
      seen[static_cast<std::size_t>(r * side + c)] = 1;
      while (!stack.empty()) {
        const Cell cur = stack.back();
        stack.pop_back();
        cells.push_back(cur);
        const Cell next[4] = {{cur.row - 1, cur.col}, {cur.row + 1, cur.col},
                              {cur.row, cur.col - 1}, {cur.row, cur.col + 1}};
        for (const Cell& n : next) {
          if (n.row < 0 || n.col < 0 || n.row >= side || n.col >= side) continue;
          const auto idx = static_cast<std::size_t>(n.row * side + n.col);
          if (seen[idx] || grid.at(n.row, n.col) != color) continue;
          seen[idx] = 1;
          stack.push_back(n);
        }
      }
      if (static_cast<int>(cells.size()) < kMinComponentCells) continue;
      DetectedObject obj;
      obj.color = color;
      obj.cell_count = static_cast<int>(cells.size());
      int r0 = side, r1 = -1, c0 = side, c1 = -1;
      double sr = 0.0, sc = 0.0;
      for (const Cell& cell : cells) {
        r0 = std::min(r0, cell.row);
        r1 = std::max(r1, cell.row);
        c0 = std::min(c0, cell.col);
        c1 = std::max(c1, cell.col);
        sr += cell.row;
        sc += cell.col;
      }
      obj.row0 = r0;
      obj.col0 = c0;
      obj.rows = r1 - r0 + 1;
      obj.cols = c1 - c0 + 1;
      obj.centroid = {sr / obj.cell_count, sc / obj.cell_count};
      obj.shape = classify_shape(cells);
      out.push_back(obj);
    }
  }
  return out;
}

std::string_view dimension_name(Dimension d) {
  switch (d) {
    case Dimension::single_object: return "single_object";
    case Dimension::two_objects: return "two_objects";
    case Dimension::counting: return "counting";
    case Dimension::colors: return "colors";
    case Dimension::position: return "position";
    case Dimension::color_attribute: return "color_attribute";
  }
  return "?";
}

std::optional<Dimension> parse_dimension(std::string_view name) {
  for (Dimension d : kAllDimensions) {
    if (dimension_name(d) == name) return d;
  }
  return std::nullopt;
}

void validate_constraint(const EvalConstraint& c) {
  const std::string dim(dimension_name(c.dimension));
  for (const auto& o : c.objects) {
    if (o.color < scene::kFirstObjectColor || o.color > scene::kLastObjectColor) {
      throw InvalidArgument(dim + " constraint names a color outside the object palette");
    }
    if (o.count < 1 || o.count > scene::kMaxObjects) {
      throw InvalidArgument(dim + " constraint count outside [1, 4]");
    }
  }
  std::size_t want = 1;
  switch (c.dimension) {
    case Dimension::single_object:
    case Dimension::colors:
    case Dimension::counting:
      want = 1;
      break;
    case Dimension::two_objects:
    case Dimension::position:
    case Dimension::color_attribute:
      want = 2;
      break;
  }
  if (c.objects.size() != want) {
    throw InvalidArgument(dim + " constraint needs " + std::to_string(want) + " object(s)");
  }
  if (c.dimension == Dimension::counting && c.objects[0].count < 2) {
    throw InvalidArgument("counting constraint needs a count of at least two");
  }
  if (c.dimension != Dimension::counting) {
    for (const auto& o : c.objects) {
      if (o.count != 1) throw InvalidArgument(dim + " constraint objects must have count 1");
    }
  }
  if ((c.dimension == Dimension::position) != c.relation.has_value()) {
    throw InvalidArgument("relation is required for position constraints and only for them");
  }
  if (want == 2 && c.objects[0].shape == c.objects[1].shape &&
      c.dimension != Dimension::position) {
    throw InvalidArgument(dim + " constraint needs two distinct shapes");
  }
}

nlohmann::json constraint_to_json(const EvalConstraint& c) {
  nlohmann::ordered_json j;
  j["dimension"] = dimension_name(c.dimension);
  nlohmann::ordered_json objs = nlohmann::ordered_json::array();
  for (const auto& o : c.objects) {
    nlohmann::ordered_json jo;
    jo["shape"] = scene::shape_name(o.shape);
    jo["color"] = scene::color_name(o.color);
    jo["count"] = o.count;
    objs.push_back(jo);
  }
  j["objects"] = objs;
  if (c.relation) j["relation"] = scene::relation_name(*c.relation);
  return nlohmann::json::parse(j.dump());
}

EvalConstraint constraint_from_json(const nlohmann::json& j) {
  EvalConstraint c;
  const auto dim_name = j.at("dimension").get<std::string>();
  const auto dim = parse_dimension(dim_name);
  if (!dim) throw InvalidArgument("unknown dimension '" + dim_name + "'");
  c.dimension = *dim;
  for (const auto& jo : j.at("objects")) {
    TargetObject o;
    const auto shape_s = jo.at("shape").get<std::string>();
    const auto shape = scene::parse_shape(shape_s);
    if (!shape) throw InvalidArgument("unknown shape '" + shape_s + "'");
    o.shape = *shape;
    const auto color_s = jo.at("color").get<std::string>();
    const auto color = scene::parse_color(color_s);
    if (!color) throw InvalidArgument("unknown color '" + color_s + "'");
    o.color = *color;
    o.count = jo.value("count", 1);
    c.objects.push_back(o);
  }
  if (j.contains("relation")) {
    const auto rel_s = j.at("relation").get<std::string>();
    const auto rel = scene::parse_relation(rel_s);
    if (!rel) throw InvalidArgument("unknown relation '" + rel_s + "'");
    c.relation = *rel;
  }
  validate_constraint(c);
  return c;
}

bool relation_holds(scene::Relation relation, const scene::Centroid& a, const scene::Centroid& b) {
  switch (relation) {
    case scene::Relation::left_of: return b.col - a.col >= 1.0;
    case scene::Relation::right_of: return a.col - b.col >= 1.0;
    case scene::Relation::above: return b.row - a.row >= 1.0;
    case scene::Relation::below: return a.row - b.row >= 1.0;
  }
  return false;
}

namespace {

bool has(const std::vector<DetectedObject>& found, Shape shape, std::optional<PaletteIndex> color) {
  return std::any_of(found.begin(), found.end(), [&](const DetectedObject& d) {
    return d.shape == shape && (!color || d.color == *color);
  });
}

int count_of(const std::vector<DetectedObject>& found, Shape shape, PaletteIndex color) {
  return static_cast<int>(std::count_if(found.begin(), found.end(), [&](const DetectedObject& d) {
    return d.shape == shape && d.color == color;
  }));
}

}  // namespace

bool check_dimension(Dimension d, const EvalConstraint& c, const std::vector<DetectedObject>& found) {
  switch (d) {
    case Dimension::single_object:
      return c.objects.size() == 1 && count_of(found, c.objects[0].shape, c.objects[0].color) == 1;
    case Dimension::two_objects:
      return std::all_of(c.objects.begin(), c.objects.end(),
                         [&](const TargetObject& o) { return has(found, o.shape, std::nullopt); });
    case Dimension::counting:
      return std::all_of(c.objects.begin(), c.objects.end(), [&](const TargetObject& o) {
        return count_of(found, o.shape, o.color) == o.count;
      });
    case Dimension::colors:
      return std::all_of(c.objects.begin(), c.objects.end(), [&](const TargetObject& o) {
        bool any = false;
        for (const auto& f : found) {
          if (f.shape != o.shape) continue;
          if (f.color != o.color) return false;
          any = true;
        }
        return any;
      });
    case Dimension::position: {
      if (!c.relation || c.objects.size() != 2) return false;
      for (const auto& a : found) {
        if (a.shape != c.objects[0].shape || a.color != c.objects[0].color) continue;
        for (const auto& b : found) {
          if (&a == &b || b.shape != c.objects[1].shape || b.color != c.objects[1].color) continue;
          if (relation_holds(*c.relation, a.centroid, b.centroid)) return true;
        }
      }
      return false;
    }
    case Dimension::color_attribute:
      return std::all_of(c.objects.begin(), c.objects.end(),
                         [&](const TargetObject& o) { return has(found, o.shape, o.color); });
  }
  return false;
}

bool PromptScore::passed() const {
  return std::all_of(flags.begin(), flags.end(), [](const std::optional<bool>& f) { return !f || *f; });
}

PromptScore score_prompt(const EvalConstraint& constraint, const TokenGrid& grid) {
  validate_constraint(constraint);
  const auto found = detect_objects(grid);
  PromptScore score;
  auto eval = [&](Dimension d) {
    score.flags[static_cast<std::size_t>(d)] = check_dimension(d, constraint, found);
  };
  eval(constraint.dimension);
  const bool distinct_pair = constraint.objects.size() == 2 &&
                             constraint.objects[0].shape != constraint.objects[1].shape;
  if (distinct_pair) {
    eval(Dimension::two_objects);
    eval(Dimension::color_attribute);
  }
  if (constraint.objects.size() == 1 && constraint.objects[0].count == 1) {
    eval(Dimension::single_object);
    eval(Dimension::colors);
  }
  return score;
}

}  // namespace mtgrid::eval
