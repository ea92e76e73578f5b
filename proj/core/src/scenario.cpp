#include "formation/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "formation/errors.hpp"

namespace formation {

using json = nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw ValidationError(field, what);
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) fail(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail(path.empty() ? key : path + "." + key, "missing required key");
  return *it;
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

double get_number(const json& obj, const std::string& key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_number()) fail(join(path, key), "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(join(path, key), "expected a finite number");
  return d;
}

int get_int(const json& obj, const std::string& key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_number_integer()) fail(join(path, key), "expected an integer");
  return v.get<int>();
}

Vector get_vector(const json& v, const std::string& field) {
  if (!v.is_array()) fail(field, "expected an array of numbers");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) fail(field, "expected an array of numbers");
    out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
  }
  if (!out.allFinite()) fail(field, "non-finite entry");
  return out;
}

json vector_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Matrix heading_rotation(GroupMode mode, double theta) {
  return rotation_exp(mode, Vector::Constant(1, theta));
}

std::vector<Pose> parse_initial_state(const json& arr, GroupMode mode, int agent_count,
                                      const std::string& path) {
  if (!arr.is_array()) fail(path, "expected a list of poses");
  const int n = space_dim(mode);
  std::vector<std::optional<Pose>> slots(static_cast<std::size_t>(std::max(agent_count - 1, 0)));
  for (std::size_t k = 0; k < arr.size(); ++k) {
    const std::string here = path + "[" + std::to_string(k) + "]";
    const json& entry = arr[k];
    const int agent = get_int(entry, "agent", here);
    if (agent == 1) fail(join(here, "agent"), "agent 1 is the reference and has no state");
    if (agent < 2 || agent > agent_count) {
      fail(join(here, "agent"), "agent id " + std::to_string(agent) + " out of range");
    }
    auto& slot = slots[static_cast<std::size_t>(agent - 2)];
    if (slot) fail(join(here, "agent"), "duplicate pose for agent " + std::to_string(agent));

    const json& rot = require(entry, "rotation", here);
    Matrix rotation;
    if (rot.is_number()) {
      if (mode == GroupMode::SE3) {
        fail(join(here, "rotation"), "SE3 mode requires a row-major 3x3 matrix");
      }
      rotation = heading_rotation(mode, rot.get<double>());
    } else {
      const Vector flat = get_vector(rot, join(here, "rotation"));
      if (flat.size() != n * n) {
        fail(join(here, "rotation"), "expected " + std::to_string(n * n) + " row-major entries");
      }
      rotation = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                Eigen::RowMajor>>(flat.data(), n, n);
    }
    const Vector translation = get_vector(require(entry, "translation", here), join(here, "translation"));
    if (translation.size() != n) {
      fail(join(here, "translation"), "expected " + std::to_string(n) + " entries");
    }
    try {
      slot.emplace(rotation, translation);
    } catch (const InvalidArgument& e) {
      fail(join(here, "rotation"), e.what());
    }
  }
  std::vector<Pose> poses;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i]) fail(path, "missing pose for agent " + std::to_string(i + 2));
    poses.push_back(*slots[i]);
  }
  return poses;
}

json state_json(const StateTuple& state) {
  json arr = json::array();
  const int n = space_dim(state.mode());
  for (int agent = 2; agent <= state.agent_count(); ++agent) {
    const Pose& p = state.pose(agent);
    json rot = json::array();
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) rot.push_back(p.rotation()(r, c));
    arr.push_back({{"agent", agent}, {"rotation", rot}, {"translation", vector_json(p.translation())}});
  }
  return arr;
}

Scenario from_json(const json& doc) {
  if (!doc.is_object()) fail("", "scenario document must be an object");
  Scenario s;
  if (auto it = doc.find("name"); it != doc.end()) {
    if (!it->is_string()) fail("name", "expected a string");
    s.name = it->get<std::string>();
  }
  const json& mode = require(doc, "mode", "");
  if (!mode.is_string()) fail("mode", "expected a string");
  try {
    s.mode = parse_group_mode(mode.get<std::string>());
  } catch (const InvalidArgument& e) {
    fail("mode", e.what());
  }
  const int n = space_dim(s.mode);

  const json& agents = require(doc, "agents", "");
  if (!agents.is_array() || agents.empty()) fail("agents", "expected a non-empty list");
  s.agent_count = static_cast<int>(agents.size());
  std::set<int> agent_ids;
  for (std::size_t a = 0; a < agents.size(); ++a) {
    const std::string here = "agents[" + std::to_string(a) + "]";
    const int id = get_int(agents[a], "id", here);
    if (id < 1 || id > s.agent_count) {
      fail(join(here, "id"), "agent ids must be 1..N (N = " + std::to_string(s.agent_count) + ")");
    }
    if (!agent_ids.insert(id).second) fail(join(here, "id"), "duplicate agent id");
    const json& tags = require(agents[a], "tags", here);
    if (!tags.is_array()) fail(join(here, "tags"), "expected a list");
    for (std::size_t t = 0; t < tags.size(); ++t) {
      const std::string tpath = here + ".tags[" + std::to_string(t) + "]";
      TagLayout tag;
      tag.tag_id = get_int(tags[t], "id", tpath);
      tag.agent_id = id;
      tag.body_position = get_vector(require(tags[t], "body_position", tpath), join(tpath, "body_position"));
      if (tag.body_position.size() != n) {
        fail(join(tpath, "body_position"), "expected " + std::to_string(n) + " entries");
      }
      s.tags.push_back(std::move(tag));
    }
  }
  std::sort(s.tags.begin(), s.tags.end(),
            [](const TagLayout& a, const TagLayout& b) { return a.tag_id < b.tag_id; });
  for (std::size_t t = 1; t < s.tags.size(); ++t) {
    if (s.tags[t].tag_id == s.tags[t - 1].tag_id) {
      fail("agents.tags", "duplicate tag id " + std::to_string(s.tags[t].tag_id));
    }
  }

  const json& graph = require(doc, "graph", "");
  const json& type = require(graph, "type", "graph");
  if (!type.is_string()) fail("graph.type", "expected a string");
  if (type == "full") {
    const double sigma = get_number(graph, "sigma", "graph");
    if (!(sigma > 0.0)) fail("graph.sigma", "sigma must be > 0");
    if (s.agent_count < 2) fail("agents", "a full graph needs at least 2 agents");
    s.graph = fully_connected_graph(s.tags, sigma);
  } else if (type == "explicit") {
    const json& edges = require(graph, "edges", "graph");
    if (!edges.is_array()) fail("graph.edges", "expected a list");
    std::vector<Edge> list;
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const std::string here = "graph.edges[" + std::to_string(e) + "]";
      Edge edge{get_int(edges[e], "i", here), get_int(edges[e], "j", here),
                get_number(edges[e], "sigma", here)};
      if (!(edge.sigma > 0.0)) fail(join(here, "sigma"), "sigma must be > 0");
      if (edge.tag_i == edge.tag_j) fail(here, "self edge");
      list.push_back(edge);
    }
    try {
      s.graph = MeasurementGraph(std::move(list));
    } catch (const InvalidArgument& e) {
      fail("graph.edges", e.what());
    }
  } else {
    fail("graph.type", "expected \"full\" or \"explicit\"");
  }

  const json& opt = require(doc, "optimizer", "");
  s.optimizer.gamma = get_number(opt, "gamma", "optimizer");
  s.optimizer.activation_radius = get_number(opt, "activation_radius", "optimizer");
  s.optimizer.safety_radius = get_number(opt, "safety_radius", "optimizer");
  s.optimizer.max_iters = get_int(opt, "max_iters", "optimizer");
  s.optimizer.grad_tol = get_number(opt, "grad_tol", "optimizer");
  s.optimizer.fd_step = get_number(opt, "fd_step", "optimizer");

  if (auto it = doc.find("estimator"); it != doc.end()) {
    const json& est = *it;
    if (est.contains("prior_sigma")) s.estimator.prior_sigma = get_number(est, "prior_sigma", "estimator");
    if (est.contains("translation_jitter"))
      s.estimator.translation_jitter = get_number(est, "translation_jitter", "estimator");
    if (est.contains("trials")) s.estimator.trials = get_int(est, "trials", "estimator");
    if (est.contains("checkpoints")) s.estimator.checkpoints = get_int(est, "checkpoints", "estimator");
  }

  try {
    s.initial_state = StateTuple(
        s.mode, parse_initial_state(require(doc, "initial_state", ""), s.mode, s.agent_count,
                                    "initial_state"));
  } catch (const InvalidArgument& e) {
    fail("initial_state", e.what());
  }

  if (auto it = doc.find("seed"); it != doc.end()) {
    if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0)) {
      fail("seed", "expected a non-negative 64-bit integer");
    }
    s.seed = it->get<std::uint64_t>();
  }
  s.validate();
  return s;
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError("", std::string("malformed document: ") + e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

MeasurementGraph::MeasurementGraph(std::vector<Edge> edges) {
  for (auto& e : edges) {
    if (e.tag_i == e.tag_j) throw InvalidArgument("self edge on tag " + std::to_string(e.tag_i));
    if (!(e.sigma > 0.0) || !std::isfinite(e.sigma)) {
      throw InvalidArgument("edge (" + std::to_string(e.tag_i) + ", " + std::to_string(e.tag_j) +
                            ") has non-positive sigma");
    }
    if (e.tag_i > e.tag_j) std::swap(e.tag_i, e.tag_j);
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return std::pair(a.tag_i, a.tag_j) < std::pair(b.tag_i, b.tag_j);
  });
  for (std::size_t k = 1; k < edges.size(); ++k) {
    if (edges[k].tag_i == edges[k - 1].tag_i && edges[k].tag_j == edges[k - 1].tag_j) {
      throw InvalidArgument("duplicate edge (" + std::to_string(edges[k].tag_i) + ", " +
                            std::to_string(edges[k].tag_j) + ")");
    }
  }
  edges_ = std::move(edges);
}

MeasurementGraph fully_connected_graph(const std::vector<TagLayout>& tags, double sigma) {
  std::set<int> agents;
  for (const auto& t : tags) agents.insert(t.agent_id);
  if (agents.size() < 2) throw InvalidArgument("fully_connected_graph: need at least 2 agents");
  std::vector<Edge> edges;
  for (std::size_t a = 0; a < tags.size(); ++a) {
    for (std::size_t b = a + 1; b < tags.size(); ++b) {
      if (tags[a].agent_id == tags[b].agent_id) continue;
      if (tags[a].tag_id == tags[b].tag_id) continue;
      edges.push_back({tags[a].tag_id, tags[b].tag_id, sigma});
    }
  }
  return MeasurementGraph(std::move(edges));
}

int Scenario::lookup(int tag_id) const { return tag(tag_id).agent_id; }

const TagLayout& Scenario::tag(int tag_id) const {
  for (const auto& t : tags) {
    if (t.tag_id == tag_id) return t;
  }
  throw NotFound("unknown tag id " + std::to_string(tag_id));
}

std::vector<const TagLayout*> Scenario::tags_of(int agent_id) const {
  std::vector<const TagLayout*> out;
  for (const auto& t : tags) {
    if (t.agent_id == agent_id) out.push_back(&t);
  }
  return out;
}

void Scenario::validate() const {
  const int n = space_dim(mode);
  if (agent_count < 1) fail("agents", "at least one agent required");
  std::set<int> ids;
  for (const auto& t : tags) {
    if (!ids.insert(t.tag_id).second) fail("agents.tags", "duplicate tag id " + std::to_string(t.tag_id));
    if (t.agent_id < 1 || t.agent_id > agent_count) {
      fail("agents.tags", "tag " + std::to_string(t.tag_id) + " on unknown agent");
    }
    if (t.body_position.size() != n) {
      fail("agents.tags", "tag " + std::to_string(t.tag_id) + " body_position has wrong length");
    }
  }
  for (int a = 1; a <= agent_count; ++a) {
    if (tags_of(a).empty()) fail("agents", "agent " + std::to_string(a) + " has no tags");
  }
  for (std::size_t k = 0; k < graph.edges().size(); ++k) {
    const Edge& e = graph.edges()[k];
    const std::string here = "graph.edges[" + std::to_string(k) + "]";
    if (!ids.count(e.tag_i) || !ids.count(e.tag_j)) fail(here, "edge references an unknown tag");
    if (lookup(e.tag_i) == lookup(e.tag_j)) {
      fail(here, "edge joins two tags on agent " + std::to_string(lookup(e.tag_i)));
    }
    if (!(e.sigma > 0.0)) fail(here, "sigma must be > 0");
  }
  if (!(optimizer.gamma > 0.0)) fail("optimizer.gamma", "must be > 0");
  if (!(optimizer.safety_radius > 0.0)) fail("optimizer.safety_radius", "must be > 0");
  if (!(optimizer.safety_radius < optimizer.activation_radius)) {
    fail("optimizer.safety_radius", "safety radius must be smaller than the activation radius");
  }
  if (optimizer.max_iters < 0) fail("optimizer.max_iters", "must be >= 0");
  if (!(optimizer.grad_tol > 0.0)) fail("optimizer.grad_tol", "must be > 0");
  if (!(optimizer.fd_step > 0.0)) fail("optimizer.fd_step", "must be > 0");
  if (!(estimator.prior_sigma > 0.0)) fail("estimator.prior_sigma", "must be > 0");
  if (!(estimator.translation_jitter >= 0.0)) fail("estimator.translation_jitter", "must be >= 0");
  if (estimator.trials < 1) fail("estimator.trials", "must be >= 1");
  if (estimator.checkpoints < 1) fail("estimator.checkpoints", "must be >= 1");
  if (initial_state.mode() != mode) fail("initial_state", "mode does not match scenario mode");
  if (initial_state.agent_count() != agent_count) {
    fail("initial_state", "expected poses for agents 2.." + std::to_string(agent_count));
  }
}

Scenario parse_scenario(const std::string& text) { return from_json(parse_json(text)); }

Scenario load_scenario(const std::filesystem::path& path) { return parse_scenario(read_file(path)); }

std::string write_scenario(const Scenario& s) {
  json doc;
  doc["name"] = s.name;
  doc["mode"] = to_string(s.mode);
  json agents = json::array();
  for (int a = 1; a <= s.agent_count; ++a) {
    json tags = json::array();
    for (const TagLayout* t : s.tags_of(a)) {
      tags.push_back({{"id", t->tag_id}, {"body_position", vector_json(t->body_position)}});
    }
    agents.push_back({{"id", a}, {"tags", tags}});
  }
  doc["agents"] = agents;
  json edges = json::array();
  for (const Edge& e : s.graph.edges()) edges.push_back({{"i", e.tag_i}, {"j", e.tag_j}, {"sigma", e.sigma}});
  doc["graph"] = {{"type", "explicit"}, {"edges", edges}};
  doc["optimizer"] = {{"gamma", s.optimizer.gamma},
                      {"activation_radius", s.optimizer.activation_radius},
                      {"safety_radius", s.optimizer.safety_radius},
                      {"max_iters", s.optimizer.max_iters},
                      {"grad_tol", s.optimizer.grad_tol},
                      {"fd_step", s.optimizer.fd_step}};
  doc["estimator"] = {{"prior_sigma", s.estimator.prior_sigma},
                      {"translation_jitter", s.estimator.translation_jitter},
                      {"trials", s.estimator.trials},
                      {"checkpoints", s.estimator.checkpoints}};
  doc["initial_state"] = state_json(s.initial_state);
  doc["seed"] = s.seed;
  return doc.dump(2) + "\n";
}

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << write_scenario(scenario);
}

StateTuple parse_state(const std::string& text) {
  const json doc = parse_json(text);
  const json& mode_field = require(doc, "mode", "");
  if (!mode_field.is_string()) fail("mode", "expected a string");
  GroupMode mode;
  try {
    mode = parse_group_mode(mode_field.get<std::string>());
  } catch (const InvalidArgument& e) {
    fail("mode", e.what());
  }
  const json& poses = require(doc, "initial_state", "");
  if (!poses.is_array()) fail("initial_state", "expected a list of poses");
  try {
    return StateTuple(mode, parse_initial_state(poses, mode, static_cast<int>(poses.size()) + 1,
                                                "initial_state"));
  } catch (const InvalidArgument& e) {
    fail("initial_state", e.what());
  }
}

StateTuple load_state(const std::filesystem::path& path) { return parse_state(read_file(path)); }

std::string write_state(const StateTuple& state) {
  json doc;
  doc["mode"] = to_string(state.mode());
  doc["initial_state"] = state_json(state);
  return doc.dump(2) + "\n";
}

bool operator==(const Scenario& a, const Scenario& b) {
  if (a.name != b.name || a.mode != b.mode || a.agent_count != b.agent_count || a.seed != b.seed ||
      !(a.graph == b.graph) || !(a.optimizer == b.optimizer) || !(a.estimator == b.estimator) ||
      a.tags.size() != b.tags.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.tags.size(); ++i) {
    const auto& ta = a.tags[i];
    const auto& tb = b.tags[i];
    if (ta.tag_id != tb.tag_id || ta.agent_id != tb.agent_id || ta.body_position != tb.body_position) {
      return false;
    }
  }
  const auto& pa = a.initial_state.poses();
  const auto& pb = b.initial_state.poses();
  if (a.initial_state.mode() != b.initial_state.mode() || pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i].rotation() != pb[i].rotation() || pa[i].translation() != pb[i].translation()) return false;
  }
  return true;
}

}  // namespace formation
