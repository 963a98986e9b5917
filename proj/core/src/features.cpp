#include "canopy/features.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>
#include <queue>
#include <utility>

#include "canopy/colorspace.hpp"
#include "canopy/error.hpp"

namespace canopy::features {

// ---------------------------------------------------------------------------
// kd-tree

struct NeighborIndex::Impl {
  struct Node {
    // Leaf when left < 0: points [begin, end) of `order`.
    int left = -1;
    int right = -1;
    int axis = 0;
    double split = 0.0;
    std::size_t begin = 0;
    std::size_t end = 0;
  };

  static constexpr std::size_t kLeafSize = 8;

  std::vector<std::array<double, 3>> coords;
  std::vector<std::size_t> order;
  std::vector<Node> nodes;

  int build(std::size_t begin, std::size_t end) {
    const int id = static_cast<int>(nodes.size());
    nodes.push_back({});
    nodes[static_cast<std::size_t>(id)].begin = begin;
    nodes[static_cast<std::size_t>(id)].end = end;
    if (end - begin <= kLeafSize) return id;

    std::array<double, 3> lo{}, hi{};
    lo.fill(std::numeric_limits<double>::infinity());
    hi.fill(-std::numeric_limits<double>::infinity());
    for (std::size_t i = begin; i < end; ++i) {
      for (int a = 0; a < 3; ++a) {
        lo[a] = std::min(lo[a], coords[order[i]][a]);
        hi[a] = std::max(hi[a], coords[order[i]][a]);
      }
    }
    int axis = 0;
    for (int a = 1; a < 3; ++a)
      if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;
    if (hi[axis] - lo[axis] <= 0.0) return id;  // all coincident

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order.begin() + static_cast<long>(begin), order.begin() + static_cast<long>(mid),
                     order.begin() + static_cast<long>(end), [&](std::size_t a, std::size_t b) {
                       return std::pair(coords[a][axis], a) < std::pair(coords[b][axis], b);
                     });
    const double split = coords[order[mid]][axis];
    const int left = build(begin, mid);
    const int right = build(mid, end);
    auto& node = nodes[static_cast<std::size_t>(id)];
    node.axis = axis;
    node.split = split;
    node.left = left;
    node.right = right;
    return id;
  }

  using Candidate = std::pair<double, std::size_t>;  // (squared distance, index)

  void search(int node_id, const std::array<double, 3>& q, std::size_t self, std::size_t k,
              std::priority_queue<Candidate>& heap) const {
    const Node& node = nodes[static_cast<std::size_t>(node_id)];
    if (node.left < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t idx = order[i];
        if (idx == self) continue;
        const auto& c = coords[idx];
        const double dx = c[0] - q[0], dy = c[1] - q[1], dz = c[2] - q[2];
        const Candidate cand{dx * dx + dy * dy + dz * dz, idx};
        if (heap.size() < k) {
          heap.push(cand);
        } else if (cand < heap.top()) {
          heap.pop();
          heap.push(cand);
        }
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const int near = diff < 0.0 ? node.left : node.right;
    const int far = diff < 0.0 ? node.right : node.left;
    search(near, q, self, k, heap);
    // Visit the far side on equality too, so ties still resolve by index.
    if (heap.size() < k || diff * diff <= heap.top().first) search(far, q, self, k, heap);
  }
};

NeighborIndex::NeighborIndex(const ColoredPointCloud& cloud) : impl_(std::make_unique<Impl>()) {
  impl_->coords.reserve(cloud.size());
  for (const auto& p : cloud.points) impl_->coords.push_back({p.x, p.y, p.z});
  impl_->order.resize(cloud.size());
  std::iota(impl_->order.begin(), impl_->order.end(), std::size_t{0});
  if (!cloud.empty()) impl_->build(0, cloud.size());
}

NeighborIndex::~NeighborIndex() = default;
NeighborIndex::NeighborIndex(NeighborIndex&&) noexcept = default;
NeighborIndex& NeighborIndex::operator=(NeighborIndex&&) noexcept = default;

std::size_t NeighborIndex::size() const noexcept { return impl_->coords.size(); }

std::vector<std::size_t> NeighborIndex::nearest(std::size_t index, int k) const {
  if (k < 1) throw Error(ErrorKind::Validation, "neighbor count must be positive");
  if (index >= size()) throw Error(ErrorKind::Validation, "point index out of range");
  if (size() < static_cast<std::size_t>(k) + 1)
    throw Error(ErrorKind::InsufficientPoints, "cloud has " + std::to_string(size()) + " points, need at least " +
                                                   std::to_string(k + 1) + " for " + std::to_string(k) + " neighbors");
  std::priority_queue<Impl::Candidate> heap;
  impl_->search(0, impl_->coords[index], index, static_cast<std::size_t>(k), heap);
  std::vector<std::size_t> out(heap.size());
  for (std::size_t i = out.size(); i-- > 0;) {
    out[i] = heap.top().second;
    heap.pop();
  }
  return out;
}

// ---------------------------------------------------------------------------
// eigen-structure

NeighborhoodEigen covariance_eigen(std::span<const std::array<double, 3>> points) {
  if (points.empty()) throw Error(ErrorKind::InsufficientPoints, "covariance of an empty point set");
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : points) mean += Eigen::Vector3d(p[0], p[1], p[2]);
  mean /= static_cast<double>(points.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector3d d = Eigen::Vector3d(p[0], p[1], p[2]) - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(points.size());

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  NeighborhoodEigen out;
  for (int i = 0; i < 3; ++i) {
    // solver orders ascending
    const int src = 2 - i;
    out.eigenvalues[static_cast<std::size_t>(i)] = std::max(0.0, solver.eigenvalues()(src));
    Eigen::Vector3d v = solver.eigenvectors().col(src).normalized();
    int big = 0;
    for (int c = 1; c < 3; ++c)
      if (std::abs(v(c)) > std::abs(v(big)) + 1e-12) big = c;
    if (v(big) < 0.0) v = -v;
    for (int c = 0; c < 3; ++c) out.eigenvectors[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] = v(c);
  }
  return out;
}

NeighborhoodEigen neighborhood_eigen(const ColoredPointCloud& cloud, const NeighborIndex& index,
                                     std::size_t point_index, int k) {
  if (k < 3) throw Error(ErrorKind::Validation, "neighborhood size k must be >= 3");
  const auto nbrs = index.nearest(point_index, k);
  std::vector<std::array<double, 3>> pts;
  pts.reserve(nbrs.size());
  for (auto i : nbrs) {
    const auto& p = cloud.points[i];
    pts.push_back({p.x, p.y, p.z});
  }
  return covariance_eigen(pts);
}

NeighborhoodEigen neighborhood_eigen(const ColoredPointCloud& cloud, std::size_t point_index, int k) {
  if (k < 3) throw Error(ErrorKind::Validation, "neighborhood size k must be >= 3");
  if (cloud.size() < static_cast<std::size_t>(k) + 1)
    throw Error(ErrorKind::InsufficientPoints, "cloud too small for a " + std::to_string(k) + "-neighborhood");
  const NeighborIndex index(cloud);
  return neighborhood_eigen(cloud, index, point_index, k);
}

// ---------------------------------------------------------------------------
// schema

FeatureSchema FeatureSchema::color_only() { return FeatureSchema{}; }

FeatureSchema FeatureSchema::with_eigen(int neighbors) {
  FeatureSchema s;
  s.channels.push_back(FeatureChannel::Eigen);
  s.neighbors = neighbors;
  return s;
}

std::size_t FeatureSchema::arity() const {
  std::size_t n = 0;
  for (auto c : channels) n += c == FeatureChannel::Eigen ? 12 : 1;
  return n;
}

bool FeatureSchema::uses_eigen() const {
  return std::find(channels.begin(), channels.end(), FeatureChannel::Eigen) != channels.end();
}

namespace {

const char* channel_name(FeatureChannel c) {
  switch (c) {
    case FeatureChannel::AStar: return "a_star";
    case FeatureChannel::BStar: return "b_star";
    case FeatureChannel::R: return "r";
    case FeatureChannel::G: return "g";
    case FeatureChannel::B: return "b";
    case FeatureChannel::Eigen: return "eigen";
  }
  return "";
}

FeatureChannel parse_feature_channel(const std::string& name) {
  for (auto c : {FeatureChannel::AStar, FeatureChannel::BStar, FeatureChannel::R, FeatureChannel::G,
                 FeatureChannel::B, FeatureChannel::Eigen}) {
    if (name == channel_name(c)) return c;
  }
  throw Error(ErrorKind::Validation, "unknown feature channel '" + name + "'");
}

constexpr const char* kEigenColumns[12] = {"eig1", "eig2", "eig3", "ev1x", "ev1y", "ev1z",
                                           "ev2x", "ev2y", "ev2z", "ev3x", "ev3y", "ev3z"};

void write_eigen(const std::array<double, 3>& values, const std::array<std::array<double, 3>, 3>& vectors,
                 double* out) {
  for (std::size_t i = 0; i < 3; ++i) out[i] = values[i];
  for (std::size_t v = 0; v < 3; ++v)
    for (std::size_t c = 0; c < 3; ++c) out[3 + 3 * v + c] = vectors[v][c];
}

}  // namespace

std::vector<std::string> FeatureSchema::column_names() const {
  std::vector<std::string> names;
  for (auto c : channels) {
    if (c == FeatureChannel::Eigen) {
      names.insert(names.end(), std::begin(kEigenColumns), std::end(kEigenColumns));
    } else {
      names.emplace_back(channel_name(c));
    }
  }
  return names;
}

void FeatureSchema::validate() const {
  if (channels.empty()) throw Error(ErrorKind::Validation, "feature schema has no channels");
  for (std::size_t i = 0; i < channels.size(); ++i)
    for (std::size_t j = i + 1; j < channels.size(); ++j)
      if (channels[i] == channels[j])
        throw Error(ErrorKind::Validation, std::string("feature channel '") + channel_name(channels[i]) + "' repeated");
  if (uses_eigen() && neighbors < 3) throw Error(ErrorKind::Validation, "feature schema neighbors must be >= 3");
}

void to_json(nlohmann::json& j, const FeatureSchema& schema) {
  std::vector<std::string> names;
  for (auto c : schema.channels) names.emplace_back(channel_name(c));
  j = nlohmann::json{{"channels", names}, {"neighbors", schema.neighbors}};
}

void from_json(const nlohmann::json& j, FeatureSchema& schema) {
  FeatureSchema s;
  if (j.contains("channels")) {
    s.channels.clear();
    for (const auto& name : j.at("channels")) s.channels.push_back(parse_feature_channel(name.get<std::string>()));
  }
  s.neighbors = j.value("neighbors", kDefaultNeighbors);
  s.validate();
  schema = std::move(s);
}

// ---------------------------------------------------------------------------
// featurization

FeatureMatrix featurize(const ColoredPointCloud& cloud, const FeatureSchema& schema) {
  schema.validate();
  FeatureMatrix out(cloud.size(), schema.arity());
  if (cloud.empty()) return out;

  std::unique_ptr<NeighborIndex> index;
  if (schema.uses_eigen()) {
    if (cloud.size() < static_cast<std::size_t>(schema.neighbors) + 1)
      throw Error(ErrorKind::InsufficientPoints, "eigen features need at least " +
                                                     std::to_string(schema.neighbors + 1) + " points, cloud has " +
                                                     std::to_string(cloud.size()));
    index = std::make_unique<NeighborIndex>(cloud);
  }

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    const auto lab = colorspace::srgb_to_lab(p);
    auto row = out.row(i);
    std::size_t col = 0;
    for (auto c : schema.channels) {
      switch (c) {
        case FeatureChannel::AStar: row[col++] = lab.a_star; break;
        case FeatureChannel::BStar: row[col++] = lab.b_star; break;
        case FeatureChannel::R: row[col++] = p.r; break;
        case FeatureChannel::G: row[col++] = p.g; break;
        case FeatureChannel::B: row[col++] = p.b; break;
        case FeatureChannel::Eigen: {
          const auto e = neighborhood_eigen(cloud, *index, i, schema.neighbors);
          write_eigen(e.eigenvalues, e.eigenvectors, &row[col]);
          col += 12;
          break;
        }
      }
    }
  }
  return out;
}

std::vector<double> feature_row(const LabeledPointRecord& record, const FeatureSchema& schema) {
  std::vector<double> row(schema.arity());
  std::size_t col = 0;
  for (auto c : schema.channels) {
    switch (c) {
      case FeatureChannel::AStar: row[col++] = record.a_star; break;
      case FeatureChannel::BStar: row[col++] = record.b_star; break;
      case FeatureChannel::R: row[col++] = record.r; break;
      case FeatureChannel::G: row[col++] = record.g; break;
      case FeatureChannel::B: row[col++] = record.b; break;
      case FeatureChannel::Eigen:
        write_eigen(record.eigenvalues, record.eigenvectors, &row[col]);
        col += 12;
        break;
    }
  }
  return row;
}

FeatureMatrix feature_matrix(std::span<const LabeledPointRecord> records, const FeatureSchema& schema) {
  schema.validate();
  FeatureMatrix out(records.size(), schema.arity());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto row = feature_row(records[i], schema);
    std::copy(row.begin(), row.end(), out.row(i).begin());
  }
  return out;
}

LabeledPointRecord make_record(const ColoredPointCloud& cloud, const NeighborIndex& index,
                               std::size_t point_index, Label label, int k) {
  if (point_index >= cloud.size()) throw Error(ErrorKind::Validation, "point index out of range");
  const auto& p = cloud.points[point_index];
  const auto lab = colorspace::srgb_to_lab(p);
  const auto e = neighborhood_eigen(cloud, index, point_index, k);
  LabeledPointRecord rec;
  rec.label = label;
  rec.a_star = lab.a_star;
  rec.b_star = lab.b_star;
  rec.r = p.r;
  rec.g = p.g;
  rec.b = p.b;
  rec.eigenvalues = e.eigenvalues;
  rec.eigenvectors = e.eigenvectors;
  return rec;
}

}  // namespace canopy::features
