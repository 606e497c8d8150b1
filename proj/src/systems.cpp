#include "nhext/systems.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace nhext {

namespace {

using Json = nlohmann::json;

double get_param(const std::map<std::string, double>& p, const std::string& key) {
    auto it = p.find(key);
    if (it == p.end()) throw BadParams("missing parameter " + key);
    return it->second;
}

std::map<std::string, double> merged(std::map<std::string, double> defaults,
                                     const std::map<std::string, double>& overrides) {
    for (auto& [key, val] : overrides) {
        if (!defaults.count(key)) throw BadParams("unknown parameter " + key);
        defaults[key] = val;
    }
    return defaults;
}

std::vector<Expr> column(std::initializer_list<const char*> comps) {
    std::vector<Expr> out;
    for (const char* c : comps) out.push_back(Expr::parse(c));
    return out;
}

std::vector<std::vector<Expr>> parse_matrix(const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::vector<Expr>> out;
    for (auto& r : rows) {
        std::vector<Expr> row;
        for (auto& s : r) row.push_back(Expr::parse(s));
        out.push_back(std::move(row));
    }
    return out;
}

SystemSpec disk_spec(const std::map<std::string, double>& overrides) {
    SystemSpec s;
    s.name = "disk";
    s.coords = {"x", "y", "theta", "phi"};
    auto p = merged({{"M", 1.0}, {"R", 1.0}}, overrides);
    double M = get_param(p, "M"), R = get_param(p, "R");
    if (M <= 0 || R <= 0) throw BadParams("disk needs M > 0, R > 0");
    p["I"] = M * R * R / 2;  // disk about its symmetry axis
    p["J"] = M * R * R / 4;
    p["C1"] = 2.0 / R;       // = MR/I
    s.params = p;
    s.m = 2;
    // columns: X_theta, X_phi span D; X_x, X_y are the orthogonal complement
    s.frame = {
        column({"R*cos(phi)", "R*sin(phi)", "1", "0"}),
        column({"0", "0", "0", "1"}),
        column({"1", "0", "-C1*cos(phi)", "0"}),
        column({"0", "1", "-C1*sin(phi)", "0"}),
    };
    s.metric_kind = MetricKind::Coordinate;
    s.metric = parse_matrix({{"M", "0", "0", "0"},
                             {"0", "M", "0", "0"},
                             {"0", "0", "I", "0"},
                             {"0", "0", "0", "J"}});
    ChaplyginMarkup ch;
    ch.generators = {column({"1", "0", "0", "0"}), column({"0", "1", "0", "0"})};
    s.chaplygin = ch;
    s.box.range = {{-1, 1}, {-1, 1}, {-M_PI, M_PI}, {-M_PI, M_PI}};
    s.validate();
    return s;
}

SystemSpec carriage_spec(const std::map<std::string, double>& overrides) {
    SystemSpec s;
    s.name = "carriage";
    s.coords = {"x", "y", "theta", "psi1", "psi2"};
    auto p = merged({{"m", 1.0}, {"m0", 1.0}, {"J", 1.0}, {"J2", 1.0},
                     {"c", 1.0}, {"R", 1.0}, {"l", 0.1}},
                    overrides);
    for (const char* key : {"m", "m0", "J", "J2", "c", "R"})
        if (get_param(p, key) <= 0) throw BadParams(std::string("carriage needs ") + key + " > 0");
    if (get_param(p, "l") < 0) throw BadParams("carriage needs l >= 0");
    double m = p["m"], J = p["J"], J2 = p["J2"], c = p["c"], R = p["R"];
    p["D1"] = 2 * J2 + R * R * m;          // 2 J2 + R^2 m
    p["D2"] = J * R * R + 2 * J2 * c * c;  // J R^2 + 2 J2 c^2
    s.params = p;
    s.m = 2;

    auto X1 = column({"-R/2*cos(theta)", "-R/2*sin(theta)", "-R/(2*c)", "1", "0"});
    auto X2 = column({"-R/2*cos(theta)", "-R/2*sin(theta)", "R/(2*c)", "0", "1"});
    std::vector<std::vector<Expr>> gens = {
        column({"1", "0", "0", "0", "0"}),
        column({"0", "1", "0", "0", "0"}),
        column({"-y", "x", "1", "0", "0"}),
    };
    // correction coefficients of the orthogonal adaptation X~_i = E_i + K^a_i X_a
    // (closed forms of -g^{ab} g(X_b, E_i), simplified offline)
    std::vector<std::array<Expr, 2>> K = {
        {Expr::parse("R*m*cos(theta)/D1 - R*c*l*m0*sin(theta)/D2"),
         Expr::parse("R*m*cos(theta)/D1 + R*c*l*m0*sin(theta)/D2")},
        {Expr::parse("R*m*sin(theta)/D1 + R*c*l*m0*cos(theta)/D2"),
         Expr::parse("R*m*sin(theta)/D1 - R*c*l*m0*cos(theta)/D2")},
        {Expr::parse("R*J*c/D2 + R*m*(x*sin(theta)-y*cos(theta))/D1"
                     " + R*c*l*m0*(x*cos(theta)+y*sin(theta))/D2"),
         Expr::parse("-R*J*c/D2 + R*m*(x*sin(theta)-y*cos(theta))/D1"
                     " - R*c*l*m0*(x*cos(theta)+y*sin(theta))/D2")},
    };
    s.frame = {X1, X2};
    for (int i = 0; i < 3; ++i) {
        std::vector<Expr> col(5);
        for (int mu = 0; mu < 5; ++mu)
            col[mu] = ex_add(gens[i][mu],
                             ex_add(ex_mul(K[i][0], X1[mu]), ex_mul(K[i][1], X2[mu])));
        s.frame.push_back(std::move(col));
    }

    s.metric_kind = MetricKind::Coordinate;
    s.metric = parse_matrix({
        {"m", "0", "-m0*l*sin(theta)", "0", "0"},
        {"0", "m", "m0*l*cos(theta)", "0", "0"},
        {"-m0*l*sin(theta)", "m0*l*cos(theta)", "J", "0", "0"},
        {"0", "0", "0", "J2", "0"},
        {"0", "0", "0", "0", "J2"},
    });
    ChaplyginMarkup ch;
    ch.generators = gens;
    s.chaplygin = ch;
    s.box.range = {{-1, 1}, {-1, 1}, {-M_PI, M_PI}, {-M_PI, M_PI}, {-M_PI, M_PI}};
    s.validate();
    return s;
}

SystemSpec particle_spec(const std::map<std::string, double>& overrides) {
    SystemSpec s;
    s.name = "particle";
    s.coords = {"x", "y", "z"};
    auto p = merged({{"alpha", 0.0}}, overrides);
    if (std::fabs(get_param(p, "alpha")) >= 1)
        throw BadParams("particle needs |alpha| < 1 for a positive-definite metric");
    s.params = p;
    s.m = 2;
    // constraint zdot = y xdot; orthogonal complement direction
    s.frame = {
        column({"1", "0", "y"}),
        column({"0", "1", "0"}),
        column({"y*(alpha^2-1)", "-alpha", "1"}),
    };
    s.metric_kind = MetricKind::Coordinate;
    s.metric = parse_matrix({{"1", "0", "0"},
                             {"0", "1", "alpha"},
                             {"0", "alpha", "1"}});
    s.box.range = {{-1, 1}, {-0.9, 0.9}, {-1, 1}};
    s.validate();
    return s;
}

}  // namespace

SystemSpec builtin(const std::string& name,
                   const std::map<std::string, double>& overrides) {
    if (name == "disk") return disk_spec(overrides);
    if (name == "carriage") return carriage_spec(overrides);
    if (name == "particle") return particle_spec(overrides);
    throw BadParams("unknown builtin system '" + name + "'");
}

SystemSpec random_system(int n, int m, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> amp(0.05, 0.15);
    std::uniform_int_distribution<int> pick(0, n - 1);
    std::uniform_int_distribution<int> trig(0, 1);

    auto small_term = [&](std::ostringstream& os) {
        os << (trig(rng) ? "+" : "-") << amp(rng) << "*"
           << (trig(rng) ? "sin" : "cos") << "(x" << pick(rng) + 1 << ")";
    };

    SystemSpec s;
    s.name = "random" + std::to_string(seed);
    for (int i = 0; i < n; ++i) s.coords.push_back("x" + std::to_string(i + 1));
    s.m = m;
    for (int beta = 0; beta < n; ++beta) {
        std::vector<Expr> col;
        for (int mu = 0; mu < n; ++mu) {
            std::ostringstream os;
            os << (mu == beta ? "1" : "0");
            small_term(os);
            col.push_back(Expr::parse(os.str()));
        }
        s.frame.push_back(std::move(col));
    }
    s.metric_kind = MetricKind::Coordinate;
    s.metric.assign(n, std::vector<Expr>(n));
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            std::ostringstream os;
            os << (i == j ? "1" : "0");
            small_term(os);
            s.metric[i][j] = s.metric[j][i] = Expr::parse(os.str());
        }
    s.box.range.assign(n, {-1.0, 1.0});
    s.validate();
    return s;
}

// ------------------------------------------------------------------- JSON

namespace {

std::vector<std::vector<std::string>> matrix_strings(const std::vector<std::vector<Expr>>& m) {
    std::vector<std::vector<std::string>> out;
    for (auto& row : m) {
        std::vector<std::string> r;
        for (auto& e : row) r.push_back(e.str());
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<std::vector<Expr>> matrix_exprs(const Json& j) {
    std::vector<std::vector<Expr>> out;
    for (auto& row : j) {
        std::vector<Expr> r;
        for (auto& s : row) r.push_back(Expr::parse(s.get<std::string>()));
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace

std::string system_to_json(const SystemSpec& spec) {
    Json j;
    if (!spec.name.empty()) j["name"] = spec.name;
    j["coordinates"] = spec.coords;
    j["parameters"] = spec.params;
    j["constraint_rank"] = spec.m;
    j["frame"] = matrix_strings(spec.frame);  // column-major: frame[col][component]
    j["metric"] = {
        {"kind", spec.metric_kind == MetricKind::Coordinate ? "coordinate" : "frame"},
        {"entries", matrix_strings(spec.metric)},
    };
    if (spec.chaplygin)
        j["chaplygin"] = {{"generators", matrix_strings(spec.chaplygin->generators)}};
    Json box;
    for (int i = 0; i < spec.n(); ++i)
        box[spec.coords[i]] = {spec.box.range[i][0], spec.box.range[i][1]};
    j["domain_box"] = box;
    return j.dump(2);
}

SystemSpec system_from_json(const std::string& text) {
    Json j = Json::parse(text);
    SystemSpec s;
    s.name = j.value("name", "");
    s.coords = j.at("coordinates").get<std::vector<std::string>>();
    if (j.contains("parameters"))
        s.params = j.at("parameters").get<std::map<std::string, double>>();
    s.m = j.at("constraint_rank").get<int>();
    s.frame = matrix_exprs(j.at("frame"));
    const Json& jm = j.at("metric");
    std::string kind = jm.at("kind").get<std::string>();
    if (kind == "coordinate") s.metric_kind = MetricKind::Coordinate;
    else if (kind == "frame") s.metric_kind = MetricKind::Frame;
    else throw ValidationError("metric kind must be 'coordinate' or 'frame'");
    s.metric = matrix_exprs(jm.at("entries"));
    if (j.contains("chaplygin")) {
        ChaplyginMarkup ch;
        ch.generators = matrix_exprs(j.at("chaplygin").at("generators"));
        s.chaplygin = ch;
    }
    if (j.contains("domain_box")) {
        const Json& box = j.at("domain_box");
        for (auto& name : s.coords) {
            if (!box.contains(name))
                throw ValidationError("domain_box missing coordinate " + name);
            auto r = box.at(name).get<std::vector<double>>();
            if (r.size() != 2 || !(r[0] < r[1]))
                throw ValidationError("bad domain_box range for " + name);
            s.box.range.push_back({r[0], r[1]});
        }
    }
    s.validate();
    return s;
}

SystemSpec load_system(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open system file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return system_from_json(ss.str());
}

void save_system(const SystemSpec& spec, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write system file " + path);
    out << system_to_json(spec) << "\n";
}

}  // namespace nhext
