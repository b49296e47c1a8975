#include "pathmpc/simharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

namespace pathmpc::simharness {

using nlohmann::json;
using planner::kChannels;

namespace {

constexpr double kPi = std::numbers::pi;

double deg(double d) { return d * kPi / 180.0; }

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ScenarioError(where + ": " + what);
}

const json& field(const json& j, const std::string& key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) {
        fail(where, "missing field '" + key + "'");
    }
    return j.at(key);
}

double number(const json& j, const std::string& where) {
    if (!j.is_number()) {
        fail(where, "expected a number");
    }
    return j.get<double>();
}

Eigen::VectorXd vector(const json& j, const std::string& where, int size = -1) {
    if (!j.is_array() || (size >= 0 && static_cast<int>(j.size()) != size)) {
        fail(where, size >= 0 ? "expected an array of " + std::to_string(size) + " numbers" : "expected an array");
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (size_t i = 0; i < j.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = number(j[i], where + "[" + std::to_string(i) + "]");
    }
    return v;
}

Eigen::Vector3d vec3(const json& j, const std::string& where) { return vector(j, where, 3); }

std::optional<double> optional_number(const json& j, const std::string& key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) {
        return std::nullopt;
    }
    return number(j.at(key), where + "." + key);
}

// Orientation as radians ("orientation") or multiples of pi ("orientation_pi").
lie::RotationVector orientation(const json& j, const std::string& where) {
    if (j.contains("orientation")) {
        return lie::RotationVector{vec3(j.at("orientation"), where + ".orientation")};
    }
    if (j.contains("orientation_pi")) {
        return lie::RotationVector{kPi * vec3(j.at("orientation_pi"), where + ".orientation_pi")};
    }
    fail(where, "missing field 'orientation' (or 'orientation_pi')");
}

std::vector<refpath::ViaPose> parse_vias(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() < 2) {
        fail(where, "expected at least two via poses");
    }
    std::vector<refpath::ViaPose> vias;
    for (size_t i = 0; i < j.size(); ++i) {
        const std::string w = where + "[" + std::to_string(i) + "]";
        refpath::ViaPose v;
        v.position = vec3(field(j[i], "position", w), w + ".position");
        v.orientation = orientation(j[i], w);
        vias.push_back(v);
    }
    return vias;
}

// Channel values; keys with a _deg suffix are converted to radians.
void parse_channel(const json& j, const std::string& where, planner::ChannelSpec& ch) {
    if (!j.is_object()) {
        fail(where, "expected an object");
    }
    for (const auto& [key, value] : j.items()) {
        const std::string w = where + "." + key;
        const double x = number(value, w);
        if (key == "upsilon_max") {
            ch.upsilon_max = x;
        } else if (key == "upsilon_max_deg") {
            ch.upsilon_max = deg(x);
        } else if (key == "eps") {
            ch.eps = x;
        } else if (key == "eps_deg") {
            ch.eps = deg(x);
        } else if (key == "e_upper") {
            ch.e_upper = x;
        } else if (key == "e_lower") {
            ch.e_lower = x;
        } else {
            fail(w, "unknown channel field");
        }
    }
    if (!(ch.e_lower < ch.e_upper)) {
        fail(where, "e_lower must be below e_upper");
    }
    if (!(ch.eps >= 0.0) || !(ch.upsilon_max > ch.eps)) {
        fail(where, "need 0 <= eps < upsilon_max");
    }
}

void parse_segment_bounds(const json& j, const std::string& where, planner::SegmentBoundSpec& spec) {
    if (!j.is_object()) {
        fail(where, "expected an object");
    }
    for (const auto& [key, value] : j.items()) {
        const std::string w = where + "." + key;
        if (key == "desired_position") {
            spec.desired_position = vec3(value, w);
        } else if (key == "desired_orientation") {
            spec.desired_orientation = vec3(value, w);
        } else if (key == "position" || key == "orientation") {
            const size_t base = key == "position" ? planner::kPos1 : planner::kRot1;
            if (value.is_object()) {
                parse_channel(value, w, spec.channels[base]);
                parse_channel(value, w, spec.channels[base + 1]);
            } else if (value.is_array() && value.size() == 2) {
                parse_channel(value[0], w + "[0]", spec.channels[base]);
                parse_channel(value[1], w + "[1]", spec.channels[base + 1]);
            } else {
                fail(w, "expected a channel object or an array of two");
            }
        } else {
            fail(w, "unknown bound field");
        }
    }
}

std::vector<planner::SegmentBoundSpec> parse_bounds(const json& j, const std::string& where, size_t segments,
                                                    double slope) {
    planner::SegmentBoundSpec base = planner::SegmentBoundSpec::defaults(slope);
    if (j.is_null()) {
        return std::vector<planner::SegmentBoundSpec>(segments, base);
    }
    if (j.contains("default")) {
        parse_segment_bounds(j.at("default"), where + ".default", base);
    }
    std::vector<planner::SegmentBoundSpec> specs(segments, base);
    if (j.contains("segments")) {
        const json& segs = j.at("segments");
        if (!segs.is_array() || segs.size() != segments) {
            fail(where + ".segments", "expected " + std::to_string(segments) + " entries (one per segment)");
        }
        for (size_t l = 0; l < segments; ++l) {
            parse_segment_bounds(segs[l], where + ".segments[" + std::to_string(l) + "]", specs[l]);
        }
    }
    for (auto& s : specs) {
        for (auto& ch : s.channels) {
            ch.slope = slope;
        }
    }
    return specs;
}

kinematics::KinematicChain parse_chain(const json& j, const std::string& where) {
    if (j.is_string()) {
        if (j.get<std::string>() == "lbr_iiwa14") {
            return lbr_iiwa_chain();
        }
        fail(where, "unknown robot '" + j.get<std::string>() + "'");
    }
    const json& joints = field(j, "joints", where);
    if (!joints.is_array() || joints.empty()) {
        fail(where + ".joints", "expected a nonempty array");
    }
    std::vector<kinematics::Joint> list;
    for (size_t i = 0; i < joints.size(); ++i) {
        const std::string w = where + ".joints[" + std::to_string(i) + "]";
        kinematics::Joint jt;
        jt.axis = vec3(field(joints[i], "axis", w), w + ".axis");
        jt.origin_offset = vec3(field(joints[i], "offset", w), w + ".offset");
        if (joints[i].contains("rotation")) {
            jt.origin_rotation.v = vec3(joints[i].at("rotation"), w + ".rotation");
        }
        list.push_back(jt);
    }
    kinematics::RigidTransform tool;
    if (j.contains("tool")) {
        tool.translation = vec3(field(j.at("tool"), "offset", where + ".tool"), where + ".tool.offset");
        if (j.at("tool").contains("rotation")) {
            tool.rotation.v = vec3(j.at("tool").at("rotation"), where + ".tool.rotation");
        }
    }
    try {
        return kinematics::KinematicChain(list, tool);
    } catch (const std::exception& e) {
        fail(where, e.what());
    }
}

planner::Limits parse_limits(const json& j, const std::string& where, int dof, const planner::Limits& base) {
    planner::Limits lim = base;
    if (j.is_null()) {
        return lim;
    }
    const auto get = [&](const char* key, Eigen::VectorXd& out) {
        if (j.contains(key)) {
            out = vector(j.at(key), where + "." + key, dof);
        }
    };
    get("q_min", lim.q_min);
    get("q_max", lim.q_max);
    get("qd_max", lim.qd_max);
    get("qdd_max", lim.qdd_max);
    get("jerk_max", lim.jerk_max);
    if (auto v = optional_number(j, "path_jerk_max", where)) {
        lim.path_jerk_max = *v;
    }
    return lim;
}

void parse_config(const json& j, const std::string& where, planner::MpcConfig& cfg) {
    if (j.is_null()) {
        return;
    }
    if (auto v = optional_number(j, "horizon", where)) {
        cfg.horizon = static_cast<int>(*v);
    }
    if (auto v = optional_number(j, "Ts", where)) {
        cfg.Ts = *v;
    }
    if (auto v = optional_number(j, "path_weight", where)) {
        cfg.path_weight = *v;
    }
    if (auto v = optional_number(j, "lookahead", where)) {
        cfg.lookahead = static_cast<int>(*v);
    }
    if (auto v = optional_number(j, "max_steps", where)) {
        cfg.max_steps = static_cast<int>(*v);
    }
    if (j.contains("weights")) {
        const json& w = j.at("weights");
        const std::string ww = where + ".weights";
        planner::Weights& W = cfg.weights;
        W.tangential = optional_number(w, "tangential", ww).value_or(W.tangential);
        W.error_rate = optional_number(w, "error_rate", ww).value_or(W.error_rate);
        W.nullspace = optional_number(w, "nullspace", ww).value_or(W.nullspace);
        W.joint_jerk = optional_number(w, "joint_jerk", ww).value_or(W.joint_jerk);
        W.path_jerk = optional_number(w, "path_jerk", ww).value_or(W.path_jerk);
        W.path_state = optional_number(w, "path_state", ww).value_or(W.path_state);
    }
    if (j.contains("solver")) {
        const json& s = j.at("solver");
        const std::string ws = where + ".solver";
        nlp::NlpOptions& o = cfg.solver;
        o.kkt_tol = optional_number(s, "kkt_tol", ws).value_or(o.kkt_tol);
        o.feas_tol = optional_number(s, "feas_tol", ws).value_or(o.feas_tol);
        o.max_iter = static_cast<int>(optional_number(s, "max_iter", ws).value_or(o.max_iter));
        o.max_time = optional_number(s, "max_time", ws).value_or(o.max_time);
    }
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

kinematics::KinematicChain lbr_iiwa_chain() {
    using kinematics::Joint;
    const Eigen::Vector3d z = Eigen::Vector3d::UnitZ();
    const Eigen::Vector3d y = Eigen::Vector3d::UnitY();
    std::vector<Joint> joints{
        {z, {0, 0, 0.1575}, {}}, {y, {0, 0, 0.2025}, {}}, {z, {0, 0, 0.2045}, {}}, {-y, {0, 0, 0.2155}, {}},
        {z, {0, 0, 0.1845}, {}}, {y, {0, 0, 0.2155}, {}}, {z, {0, 0, 0.081}, {}},
    };
    kinematics::RigidTransform tool;
    tool.translation = {0.0, 0.0, 0.145};
    return kinematics::KinematicChain(joints, tool);
}

planner::Limits lbr_iiwa_limits() {
    planner::Limits lim;
    Eigen::VectorXd qmax(7), qdmax(7);
    qmax << 170, 120, 170, 120, 170, 120, 175;
    qdmax << 85, 85, 100, 75, 130, 135, 135;
    lim.q_max = qmax * kPi / 180.0;
    lim.q_min = -lim.q_max;
    lim.qd_max = qdmax * kPi / 180.0;
    lim.qdd_max = Eigen::VectorXd::Constant(7, 10.0);
    lim.jerk_max = Eigen::VectorXd::Constant(7, 50.0);
    lim.path_jerk_max = 10.0;
    return lim;
}

Scenario parse_scenario(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(origin, std::string("not valid JSON: ") + e.what());
    }
    if (!j.is_object()) {
        fail(origin, "expected an object at top level");
    }
    Scenario s;
    s.name = j.value("name", std::filesystem::path(origin).stem().string());
    s.description = j.value("description", "");
    s.approximate = j.value("approximate", false);
    s.chain = parse_chain(field(j, "robot", origin), origin + ".robot");
    const int dof = s.chain.dof();
    planner::Limits base_limits;
    if (dof == 7) {
        base_limits = lbr_iiwa_limits();
    }
    s.config.limits = parse_limits(j.value("limits", json()), origin + ".limits", dof, base_limits);
    parse_config(j.value("config", json()), origin + ".config", s.config);
    const double slope = j.contains("config") ? j.at("config").value("slope", 0.1) : 0.1;

    s.initial_q = vector(field(j, "initial_q", origin), origin + ".initial_q", dof);
    s.vias = parse_vias(field(j, "vias", origin), origin + ".vias");
    s.bounds = parse_bounds(j.value("bounds", json()), origin + ".bounds", s.vias.size() - 1, slope);

    if (j.contains("events")) {
        const json& ev = j.at("events");
        if (!ev.is_array()) {
            fail(origin + ".events", "expected an array");
        }
        double last = -1.0;
        for (size_t i = 0; i < ev.size(); ++i) {
            const std::string w = origin + ".events[" + std::to_string(i) + "]";
            planner::ReplanEvent e;
            e.trigger_time = optional_number(ev[i], "trigger_time", w);
            e.trigger_phi = optional_number(ev[i], "trigger_phi", w);
            if (e.trigger_time.has_value() == e.trigger_phi.has_value()) {
                fail(w, "exactly one of trigger_time and trigger_phi is required");
            }
            const double trig = e.trigger_time ? *e.trigger_time : *e.trigger_phi;
            if (!(trig > last)) {
                fail(w, "triggers must be strictly increasing");
            }
            last = trig;
            e.request.deviation_phi = optional_number(ev[i], "deviation_phi", w);
            e.request.vias = parse_vias(field(ev[i], "vias", w), w + ".vias");
            e.request.specs = parse_bounds(ev[i].value("bounds", json()), w + ".bounds", e.request.vias.size() - 1,
                                           slope);
            s.events.push_back(std::move(e));
        }
    }
    try {
        s.config.validate(dof);
        planner::make_reference(s.vias, s.bounds);
    } catch (const std::exception& e) {
        fail(origin, e.what());
    }
    return s;
}

Scenario load_scenario(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw ScenarioError(file.string() + ": cannot open");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str(), file.string());
}

std::vector<std::string> precheck(const Scenario& scenario) {
    std::vector<std::string> findings;
    const kinematics::Pose pose = kinematics::forward_kinematics(scenario.chain, scenario.initial_q);
    const double dp = (pose.position - scenario.vias.front().position).norm();
    const double dr =
        lie::log(Eigen::Matrix3d(pose.orientation * lie::exp(scenario.vias.front().orientation.v).transpose())).norm();
    if (dp > 1e-3) {
        findings.push_back("start position is " + fixed(dp * 1e3, 3) + " mm from the first via");
    }
    if (dr > deg(1.0)) {
        findings.push_back("start orientation is " + fixed(dr * 180.0 / kPi, 3) + " deg from the first via");
    }
    const planner::Limits& lim = scenario.config.limits;
    for (int j = 0; j < scenario.chain.dof(); ++j) {
        if (scenario.initial_q(j) < lim.q_min(j) || scenario.initial_q(j) > lim.q_max(j)) {
            findings.push_back("initial joint " + std::to_string(j) + " outside its limits");
        }
    }
    try {
        kinematics::nullspace_projector(scenario.chain, scenario.initial_q);
    } catch (const std::exception& e) {
        findings.push_back(std::string("initial configuration: ") + e.what());
    }
    try {
        planner::Reference ref = planner::make_reference(scenario.vias, scenario.bounds);
        planner::PlannerState state = planner::PlannerState::at_rest(scenario.initial_q);
        for (const planner::ReplanEvent& e : scenario.events) {
            ref = planner::replan(ref, state, e.request);
        }
    } catch (const std::exception& e) {
        findings.push_back(std::string("reference: ") + e.what());
    }
    return findings;
}

Scenario apply_overrides(Scenario scenario, const Overrides& overrides) {
    if (overrides.horizon) {
        scenario.config.horizon = *overrides.horizon;
    }
    if (overrides.path_weight) {
        scenario.config.path_weight = *overrides.path_weight;
    }
    if (overrides.max_time) {
        scenario.config.solver.max_time = *overrides.max_time;
    }
    if (overrides.slope) {
        const auto set = [&](std::vector<planner::SegmentBoundSpec>& specs) {
            for (auto& s : specs) {
                for (auto& ch : s.channels) {
                    ch.slope = *overrides.slope;
                }
            }
        };
        set(scenario.bounds);
        for (auto& e : scenario.events) {
            set(e.request.specs);
        }
    }
    scenario.config.validate(scenario.chain.dof());
    return scenario;
}

planner::TrajectoryLog run(const Scenario& scenario, const Overrides& overrides) {
    const Scenario s = apply_overrides(scenario, overrides);
    planner::Reference ref = planner::make_reference(s.vias, s.bounds);
    return planner::run_loop(s.chain, std::move(ref), planner::PlannerState::at_rest(s.initial_q), s.config,
                             s.events);
}

std::vector<std::string> csv_columns(int dof) {
    std::vector<std::string> cols{"t"};
    for (const char* prefix : {"q", "qd", "qdd", "u"}) {
        for (int j = 0; j < dof; ++j) {
            cols.push_back(std::string(prefix) + std::to_string(j + 1));
        }
    }
    for (const char* c : {"phi", "phi_dot", "px", "py", "pz", "eo_x", "eo_y", "eo_z", "e_p_norm", "e_o_norm",
                          "e_p_par_norm", "e_o_par_norm"}) {
        cols.emplace_back(c);
    }
    for (const char* kind : {"proj", "upsilon", "lower", "upper"}) {
        for (const char* ch : {"p1", "p2", "o1", "o2"}) {
            cols.push_back(std::string(kind) + "_" + ch);
        }
    }
    for (const char* c : {"segment", "iterations", "revision", "status"}) {
        cols.emplace_back(c);
    }
    return cols;
}

std::string to_csv(const planner::TrajectoryLog& log, int dof) {
    std::string out;
    const auto cols = csv_columns(dof);
    for (size_t i = 0; i < cols.size(); ++i) {
        out += cols[i];
        out += i + 1 < cols.size() ? ',' : '\n';
    }
    for (const planner::LogRecord& r : log.records) {
        std::vector<std::string> f{fmt(r.t)};
        for (const Eigen::VectorXd* v : {&r.q, &r.qd, &r.qdd, &r.u}) {
            for (int j = 0; j < dof; ++j) {
                f.push_back(fmt((*v)(j)));
            }
        }
        for (double v : {r.phi, r.phi_dot, r.position.x(), r.position.y(), r.position.z(), r.e_o.x(), r.e_o.y(),
                         r.e_o.z(), r.e_p_norm, r.e_o_norm, r.e_p_par_norm, r.e_o_par_norm}) {
            f.push_back(fmt(v));
        }
        for (const auto* arr : {&r.projection, &r.upsilon, &r.lower, &r.upper}) {
            for (double v : *arr) {
                f.push_back(fmt(v));
            }
        }
        f.push_back(std::to_string(r.segment));
        f.push_back(std::to_string(r.iterations));
        f.push_back(std::to_string(r.revision));
        f.push_back(r.status);
        for (size_t i = 0; i < f.size(); ++i) {
            out += f[i];
            out += i + 1 < f.size() ? ',' : '\n';
        }
    }
    return out;
}

planner::TrajectoryLog parse_csv(const std::string& text, int dof) {
    planner::TrajectoryLog log;
    std::istringstream in(text);
    std::string line;
    const size_t ncols = csv_columns(dof).size();
    if (!std::getline(in, line)) {
        throw std::runtime_error("empty CSV");
    }
    while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            f.push_back(cell);
        }
        if (f.size() != ncols) {
            throw std::runtime_error("CSV row has " + std::to_string(f.size()) + " fields");
        }
        size_t k = 0;
        const auto next = [&] { return std::stod(f[k++]); };
        planner::LogRecord r;
        r.t = next();
        for (Eigen::VectorXd* v : {&r.q, &r.qd, &r.qdd, &r.u}) {
            v->resize(dof);
            for (int j = 0; j < dof; ++j) {
                (*v)(j) = next();
            }
        }
        r.phi = next();
        r.phi_dot = next();
        for (int i = 0; i < 3; ++i) {
            r.position(i) = next();
        }
        for (int i = 0; i < 3; ++i) {
            r.e_o(i) = next();
        }
        r.e_p_norm = next();
        r.e_o_norm = next();
        r.e_p_par_norm = next();
        r.e_o_par_norm = next();
        for (auto* arr : {&r.projection, &r.upsilon, &r.lower, &r.upper}) {
            for (double& v : *arr) {
                v = next();
            }
        }
        r.segment = std::stoi(f[k++]);
        r.iterations = std::stoi(f[k++]);
        r.revision = std::stoi(f[k++]);
        r.status = f[k++];
        log.records.push_back(r);
    }
    return log;
}

SolveStats solve_stats(const planner::TrajectoryLog& log) {
    std::vector<double> times;
    for (const auto& r : log.records) {
        if (r.status != "finished" && r.status != "budget") {
            times.push_back(r.solve_time * 1e3);
        }
    }
    SolveStats s;
    s.cycles = static_cast<int>(times.size());
    if (times.empty()) {
        return s;
    }
    s.min_ms = *std::min_element(times.begin(), times.end());
    s.max_ms = *std::max_element(times.begin(), times.end());
    double sum = 0.0;
    for (double t : times) {
        sum += t;
    }
    s.mean_ms = sum / static_cast<double>(times.size());
    std::vector<double> sorted = times;
    std::sort(sorted.begin(), sorted.end());
    const size_t m = sorted.size() / 2;
    s.median_ms = sorted.size() % 2 ? sorted[m] : 0.5 * (sorted[m - 1] + sorted[m]);
    return s;
}

std::string summary(const Scenario& scenario, const planner::TrajectoryLog& log) {
    std::ostringstream o;
    o << "scenario: " << scenario.name << (scenario.approximate ? " (approximate geometry)" : "") << "\n";
    o << "status: " << log.status << "\n";
    o << "duration_s: " << fixed(log.duration, 3) << "\n";
    o << "cycles: " << (log.records.empty() ? 0 : log.records.size() - 1) << "\n";
    o << "failed_cycles: " << log.failed_cycles << "\n";
    o << "elastic_cycles: " << log.elastic_cycles << "\n";
    o << "replans: " << log.replans << "\n";
    if (!log.records.empty()) {
        const auto& last = log.records.back();
        o << "final_position_error_mm: " << fixed(last.e_p_norm * 1e3, 4) << "\n";
        o << "final_orientation_error_deg: " << fixed(last.e_o_norm * 180.0 / kPi, 4) << "\n";
    }
    const char* names[kChannels] = {"p1", "p2", "o1", "o2"};
    for (size_t c = 0; c < kChannels; ++c) {
        double util = 0.0;
        double peak = 0.0;
        for (const auto& r : log.records) {
            peak = std::max(peak, std::abs(r.projection[c]));
            if (r.upper[c] > 0.0 && r.projection[c] > 0.0) {
                util = std::max(util, r.projection[c] / r.upper[c]);
            }
            if (r.lower[c] < 0.0 && r.projection[c] < 0.0) {
                util = std::max(util, r.projection[c] / r.lower[c]);
            }
        }
        o << "max_abs_proj_" << names[c] << ": " << fmt(peak) << "\n";
        o << "max_utilization_" << names[c] << ": " << fixed(util, 4) << "\n";
    }
    const SolveStats st = solve_stats(log);
    o << "solve_ms_min: " << fixed(st.min_ms, 3) << "\n";
    o << "solve_ms_max: " << fixed(st.max_ms, 3) << "\n";
    o << "solve_ms_mean: " << fixed(st.mean_ms, 3) << "\n";
    o << "solve_ms_median: " << fixed(st.median_ms, 3) << "\n";
    return o.str();
}

void write_outputs(const Scenario& scenario, const planner::TrajectoryLog& log, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream f(dir / "trajectory.csv", std::ios::binary);
        f << to_csv(log, scenario.chain.dof());
        if (!f) {
            throw std::runtime_error("failed to write " + (dir / "trajectory.csv").string());
        }
    }
    std::ofstream f(dir / "summary.txt");
    f << summary(scenario, log);
    if (!f) {
        throw std::runtime_error("failed to write " + (dir / "summary.txt").string());
    }
}

}  // namespace pathmpc::simharness
