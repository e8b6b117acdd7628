#include "mobnp/cli_io.hpp"

#include "mobnp/errors.hpp"
#include "mobnp/format.hpp"
#include "mobnp/point_estimates.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace mobnp {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::string library_version() { return "1.0.0"; }

// ---------------------------------------------------------------------------
// CSV

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

namespace {

std::string location(const fs::path& path, std::size_t line, std::size_t column = 0) {
    std::string s = path.string() + ":" + std::to_string(line);
    if (column > 0)
        s += ":" + std::to_string(column);
    return s;
}

std::ifstream open_input(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open " + path.string());
    return in;
}

std::ofstream open_output(const fs::path& path) {
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ConfigError("cannot write " + path.string());
    return out;
}

double parse_number(const std::string& text, const fs::path& path, std::size_t line, std::size_t column) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    std::size_t end = used;
    while (end < text.size() && std::isspace(static_cast<unsigned char>(text[end])))
        ++end;
    if (used == 0 || end != text.size())
        throw ParseError(location(path, line, column) + ": not a number: '" + text + "'");
    return v;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
};

CsvTable read_csv(const fs::path& path) {
    std::ifstream in = open_input(path);
    CsvTable table;
    std::string line;
    std::size_t number = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty() || line == "\r")
            continue;
        auto fields = split_csv_line(line);
        if (!have_header) {
            table.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != table.header.size())
            throw ParseError(location(path, number) + ": expected " + std::to_string(table.header.size()) +
                             " fields, found " + std::to_string(fields.size()));
        table.rows.push_back(std::move(fields));
        table.line_numbers.push_back(number);
    }
    if (!have_header)
        throw ParseError(path.string() + ": empty file");
    return table;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"')
            out += '"';
        out += ch;
    }
    return out + "\"";
}

} // namespace

PlatformMatrix load_platform(const fs::path& path, Transform transform, double clip_eps) {
    const CsvTable table = read_csv(path);
    if (table.header.size() < 2)
        throw ParseError(location(path, 1) + ": need a patient-id column and at least one probe");
    PlatformMatrix pm;
    pm.transform = transform;
    pm.probe_names.assign(table.header.begin() + 1, table.header.end());
    const auto n = static_cast<Eigen::Index>(table.rows.size());
    const auto p = static_cast<Eigen::Index>(pm.probe_names.size());
    MatrixXd raw(n, p);
    std::unordered_set<std::string> seen;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = table.rows[i];
        if (!seen.insert(row[0]).second)
            throw ParseError(location(path, table.line_numbers[i], 1) + ": duplicate patient id '" + row[0] + "'");
        pm.patient_ids.push_back(row[0]);
        for (Eigen::Index j = 0; j < p; ++j)
            raw(i, j) = parse_number(row[j + 1], path, table.line_numbers[i], static_cast<std::size_t>(j) + 2);
    }
    if (transform == Transform::logit && clip_eps > 0.0)
        raw = clip_proportions(raw, clip_eps);
    pm.values = transform_platform(raw, transform);
    return pm;
}

ClinicalOutcomes load_clinical(const fs::path& path, const std::vector<std::string>& patient_order) {
    const CsvTable table = read_csv(path);
    auto column = [&](const std::string& name) {
        const auto it = std::find(table.header.begin(), table.header.end(), name);
        if (it == table.header.end())
            throw ParseError(location(path, 1) + ": missing column '" + name + "'");
        return static_cast<std::size_t>(it - table.header.begin());
    };
    const std::size_t c_id = column("patient_id"), c_time = column("time"), c_event = column("event");
    std::unordered_map<std::string, int> position;
    for (std::size_t i = 0; i < patient_order.size(); ++i)
        position[patient_order[i]] = static_cast<int>(i);
    const auto n = static_cast<Eigen::Index>(patient_order.size());
    VectorXd time = VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
    std::vector<int> event(n, -1);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = table.line_numbers[r];
        const auto it = position.find(row[c_id]);
        if (it == position.end())
            throw ParseError(location(path, line, c_id + 1) + ": unknown patient id '" + row[c_id] + "'");
        const int i = it->second;
        if (event[i] != -1)
            throw ParseError(location(path, line, c_id + 1) + ": duplicate patient id '" + row[c_id] + "'");
        const double t = parse_number(row[c_time], path, line, c_time + 1);
        if (!(t > 0.0))
            throw DomainError(location(path, line, c_time + 1) + ": time must be positive");
        const double e = parse_number(row[c_event], path, line, c_event + 1);
        if (e != 0.0 && e != 1.0)
            throw DomainError(location(path, line, c_event + 1) + ": event must be 0 or 1");
        time(i) = t;
        event[i] = static_cast<int>(e);
    }
    for (Eigen::Index i = 0; i < n; ++i)
        if (event[i] == -1)
            throw ParseError(path.string() + ": no outcome for patient '" + patient_order[i] + "'");
    return ClinicalOutcomes::from_times(time, std::move(event));
}

void write_platform(const fs::path& path, const PlatformMatrix& platform) {
    write_matrix(path, platform.values, platform.probe_names, platform.patient_ids, "patient_id");
}

void write_clinical(const fs::path& path, const ClinicalOutcomes& outcomes, const std::vector<std::string>& patient_ids) {
    auto out = open_output(path);
    out << "patient_id,time,event\n";
    for (int i = 0; i < outcomes.n(); ++i)
        out << csv_field(patient_ids[i]) << ',' << format_double(outcomes.observed_time(i)) << ','
            << outcomes.event[i] << '\n';
}

void write_matrix(const fs::path& path, const MatrixXd& m, const std::vector<std::string>& column_names,
                  const std::vector<std::string>& row_names, const std::string& corner) {
    auto out = open_output(path);
    const bool names = !row_names.empty();
    if (!column_names.empty()) {
        if (names)
            out << csv_field(corner) << ',';
        for (std::size_t j = 0; j < column_names.size(); ++j)
            out << (j ? "," : "") << csv_field(column_names[j]);
        out << '\n';
    }
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (names)
            out << csv_field(row_names[i]) << ',';
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            out << (j ? "," : "") << format_double(m(i, j));
        out << '\n';
    }
}

void write_matrix(const fs::path& path, const MatrixXi& m) {
    auto out = open_output(path);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            out << (j ? "," : "") << m(i, j);
        out << '\n';
    }
}

MatrixXd read_matrix(const fs::path& path, bool header, bool row_names) {
    std::ifstream in = open_input(path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty())
            continue;
        if (header && number == 1)
            continue;
        const auto fields = split_csv_line(line);
        std::vector<double> row;
        for (std::size_t j = row_names ? 1 : 0; j < fields.size(); ++j)
            row.push_back(fields[j] == "NA" ? std::numeric_limits<double>::quiet_NaN()
                                            : parse_number(fields[j], path, number, j + 1));
        if (!rows.empty() && row.size() != rows.front().size())
            throw ParseError(location(path, number) + ": ragged row");
        rows.push_back(std::move(row));
    }
    MatrixXd m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            m(i, j) = rows[i][j];
    return m;
}

void write_allocation(const fs::path& path, const Allocation& alloc, const std::vector<std::string>& names,
                      const std::string& name_header) {
    auto out = open_output(path);
    out << name_header << ",cluster\n";
    for (std::size_t i = 0; i < alloc.size(); ++i)
        out << csv_field(names[i]) << ',' << alloc[i] + 1 << '\n';
}

Allocation read_allocation(const fs::path& path) {
    const CsvTable table = read_csv(path);
    Allocation alloc;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const double v = parse_number(table.rows[r].back(), path, table.line_numbers[r], table.header.size());
        if (v < 1 || v != std::floor(v))
            throw ParseError(location(path, table.line_numbers[r]) + ": cluster labels are positive integers");
        alloc.push_back(static_cast<int>(v) - 1);
    }
    return alloc;
}

// ---------------------------------------------------------------------------
// Config

namespace {

namespace pt = boost::property_tree;

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (item.empty())
            continue;
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size())
                throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("config: not a number in list: '" + item + "'");
        }
    }
    return out;
}

std::string format_list(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i)
        s += (i ? ", " : "") + format_double(v[i]);
    return s;
}

std::string format_list(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i)
        s += (i ? ", " : "") + std::to_string(v[i]);
    return s;
}

std::vector<int> to_ints(const std::vector<double>& v, const std::string& key) {
    std::vector<int> out;
    for (double x : v) {
        if (x != std::floor(x))
            throw ConfigError("config: " + key + " needs integers");
        out.push_back(static_cast<int>(x));
    }
    return out;
}

template <typename T>
void read(const pt::ptree& tree, const std::string& key, T& value) {
    if (const auto v = tree.get_optional<std::string>(key)) {
        try {
            if constexpr (std::is_same_v<T, bool>) {
                std::string s = *v;
                std::transform(s.begin(), s.end(), s.begin(), ::tolower);
                if (s == "true" || s == "1" || s == "yes")
                    value = true;
                else if (s == "false" || s == "0" || s == "no")
                    value = false;
                else
                    throw std::invalid_argument(s);
            } else if constexpr (std::is_same_v<T, std::string>) {
                value = *v;
            } else {
                value = tree.get<T>(key);
            }
        } catch (const std::exception&) {
            throw ConfigError("config: bad value for " + key + ": '" + *v + "'");
        }
    }
}

const std::unordered_set<std::string>& known_keys() {
    static const std::unordered_set<std::string> keys = {
        "run.seed", "run.out",
        "data.clinical", "data.clip_eps",
        "model.alpha1", "model.alpha2", "model.alpha3", "model.alpha4", "model.mu0", "model.tau0",
        "model.discount", "model.sample_discount", "model.sigma_shape", "model.sigma_scale",
        "model.per_platform_sigma",
        "chain.sweeps_1a", "chain.sweeps_1b", "chain.sweeps_1c", "chain.burn_in_fraction", "chain.thin",
        "chain.init_cut_height", "chain.discount_rw_sd", "chain.discount_jump_prob", "chain.debug_checks",
        "selection.sweeps", "selection.burn_in_fraction", "selection.thin", "selection.g", "selection.tau_shape",
        "selection.tau_scale", "selection.spline_order", "selection.spline_knots", "selection.fdr_alpha",
        "simulate.n", "simulate.p", "simulate.discount", "simulate.alpha1", "simulate.alpha3", "simulate.alpha4",
        "simulate.mu0", "simulate.tau0", "simulate.sigma", "simulate.h", "simulate.truncation",
        "simulate.survival", "simulate.survival_predictors", "simulate.survival_effect",
        "simulate.survival_censor_fraction",
        "replicate.h_values", "replicate.sigma_values", "replicate.replicates", "replicate.threads",
        "replicate.match_generator"};
    return keys;
}

} // namespace

void RunConfig::validate(bool need_platforms) const {
    if (need_platforms && platforms.empty())
        throw ConfigError("config: at least one platform is required");
    sampler.hyper.validate();
    sampler.schedule.validate();
    selection.validate();
    if (clip_eps < 0.0 || clip_eps >= 0.5)
        throw ConfigError("config: clip_eps must lie in [0, 0.5)");
}

RunConfig parse_config(std::istream& in, const fs::path& base_dir) {
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    RunConfig c;
    c.replication.sampler = sampler_for_simulation(c.simulation);
    for (const auto& [section, body] : tree)
        for (const auto& [key, value] : body) {
            const std::string full = section + "." + key;
            const bool platform_key = section == "data" && (key.rfind("platform", 0) == 0 || key.rfind("transform", 0) == 0);
            if (!platform_key && !known_keys().count(full))
                throw ConfigError("config: unknown key " + full);
        }

    auto resolve = [&](const std::string& p) {
        fs::path path(p);
        return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
    };
    std::string out_dir;
    read(tree, "run.out", out_dir);
    if (!out_dir.empty())
        c.out_dir = resolve(out_dir);
    std::uint64_t seed = c.seed;
    read(tree, "run.seed", seed);
    c.seed = seed;

    for (int t = 1;; ++t) {
        const auto path = tree.get_optional<std::string>("data.platform" + std::to_string(t));
        if (!path)
            break;
        PlatformSpec spec;
        spec.path = resolve(*path);
        std::string kind = "identity";
        read(tree, "data.transform" + std::to_string(t), kind);
        spec.transform = parse_transform(kind);
        c.platforms.push_back(spec);
    }
    std::string clinical;
    read(tree, "data.clinical", clinical);
    if (!clinical.empty())
        c.clinical = resolve(clinical);
    read(tree, "data.clip_eps", c.clip_eps);

    auto& hp = c.sampler.hyper;
    read(tree, "model.alpha1", hp.alpha1);
    read(tree, "model.alpha2", hp.alpha2);
    read(tree, "model.alpha3", hp.alpha3);
    read(tree, "model.alpha4", hp.alpha4);
    read(tree, "model.mu0", hp.mu0);
    read(tree, "model.tau0", hp.tau0);
    std::string discount;
    read(tree, "model.discount", discount);
    if (!discount.empty())
        hp.discount = parse_list(discount);
    read(tree, "model.sample_discount", hp.sample_discount);
    read(tree, "model.sigma_shape", hp.sigma_prior.shape);
    read(tree, "model.sigma_scale", hp.sigma_prior.scale);
    read(tree, "model.per_platform_sigma", c.sampler.per_platform_sigma);

    auto& sc = c.sampler.schedule;
    read(tree, "chain.sweeps_1a", sc.sweeps_1a);
    read(tree, "chain.sweeps_1b", sc.sweeps_1b);
    read(tree, "chain.sweeps_1c", sc.sweeps_1c);
    read(tree, "chain.burn_in_fraction", sc.burn_in_fraction);
    read(tree, "chain.thin", sc.thin);
    read(tree, "chain.init_cut_height", c.sampler.init_cut_height);
    read(tree, "chain.discount_rw_sd", c.sampler.discount_proposal.random_walk_sd);
    read(tree, "chain.discount_jump_prob", c.sampler.discount_proposal.jump_to_zero_prob);
    read(tree, "chain.debug_checks", c.sampler.debug_checks);

    auto& sel = c.selection;
    read(tree, "selection.sweeps", sel.sweeps);
    read(tree, "selection.burn_in_fraction", sel.burn_in_fraction);
    read(tree, "selection.thin", sel.thin);
    read(tree, "selection.g", sel.g_prior.g);
    read(tree, "selection.tau_shape", sel.tau_prior.shape);
    read(tree, "selection.tau_scale", sel.tau_prior.scale);
    read(tree, "selection.spline_order", sel.spline.order);
    read(tree, "selection.spline_knots", sel.spline.knots);
    read(tree, "selection.fdr_alpha", sel.fdr_alpha);

    auto& sim = c.simulation;
    read(tree, "simulate.n", sim.n);
    std::string list;
    read(tree, "simulate.p", list);
    if (!list.empty())
        sim.p = to_ints(parse_list(list), "simulate.p");
    list.clear();
    read(tree, "simulate.discount", list);
    if (!list.empty())
        sim.discount = parse_list(list);
    read(tree, "simulate.alpha1", sim.alpha1);
    read(tree, "simulate.alpha3", sim.alpha3);
    read(tree, "simulate.alpha4", sim.alpha4);
    read(tree, "simulate.mu0", sim.mu0);
    read(tree, "simulate.tau0", sim.tau0);
    read(tree, "simulate.sigma", sim.sigma);
    read(tree, "simulate.h", sim.h);
    read(tree, "simulate.truncation", sim.truncation);
    read(tree, "simulate.survival", c.simulate_survival);
    read(tree, "simulate.survival_predictors", c.survival.num_predictors);
    read(tree, "simulate.survival_effect", c.survival.effect);
    read(tree, "simulate.survival_censor_fraction", c.survival.censor_fraction);

    auto& rep = c.replication;
    list.clear();
    read(tree, "replicate.h_values", list);
    if (!list.empty())
        rep.h_values = to_ints(parse_list(list), "replicate.h_values");
    list.clear();
    read(tree, "replicate.sigma_values", list);
    if (!list.empty())
        rep.sigma_values = parse_list(list);
    read(tree, "replicate.replicates", rep.replicates);
    read(tree, "replicate.threads", rep.threads);
    bool match = true;
    read(tree, "replicate.match_generator", match);
    rep.base = sim;
    // The study fits with the chain settings above; masses follow the generator unless told otherwise.
    rep.sampler = match ? sampler_for_simulation(sim, c.sampler) : c.sampler;
    if (rep.replicates < 1 || rep.threads < 1)
        throw ConfigError("config: replicates and threads must be positive");
    c.validate(false);
    sim.validate();
    return c;
}

RunConfig load_config(const fs::path& path) {
    std::ifstream in = open_input(path);
    return parse_config(in, path.parent_path());
}

std::string format_config(const RunConfig& c) {
    std::ostringstream o;
    const auto& hp = c.sampler.hyper;
    const auto& sc = c.sampler.schedule;
    const auto& sel = c.selection;
    const auto& sim = c.simulation;
    const auto& rep = c.replication;
    auto b = [](bool v) { return v ? "true" : "false"; };
    o << "[run]\n"
      << "seed = " << c.seed << "\n"
      << "out = " << c.out_dir.string() << "\n\n"
      << "[data]\n";
    for (std::size_t t = 0; t < c.platforms.size(); ++t)
        o << "platform" << t + 1 << " = " << c.platforms[t].path.string() << "\n"
          << "transform" << t + 1 << " = " << to_string(c.platforms[t].transform) << "\n";
    if (c.clinical)
        o << "clinical = " << c.clinical->string() << "\n";
    o << "clip_eps = " << format_double(c.clip_eps) << "\n\n"
      << "[model]\n"
      << "alpha1 = " << format_double(hp.alpha1) << "\n"
      << "alpha2 = " << format_double(hp.alpha2) << "\n"
      << "alpha3 = " << format_double(hp.alpha3) << "\n"
      << "alpha4 = " << format_double(hp.alpha4) << "\n"
      << "mu0 = " << format_double(hp.mu0) << "\n"
      << "tau0 = " << format_double(hp.tau0) << "\n"
      << "discount = " << format_list(hp.discount) << "\n"
      << "sample_discount = " << b(hp.sample_discount) << "\n"
      << "sigma_shape = " << format_double(hp.sigma_prior.shape) << "\n"
      << "sigma_scale = " << format_double(hp.sigma_prior.scale) << "\n"
      << "per_platform_sigma = " << b(c.sampler.per_platform_sigma) << "\n\n"
      << "[chain]\n"
      << "sweeps_1a = " << sc.sweeps_1a << "\n"
      << "sweeps_1b = " << sc.sweeps_1b << "\n"
      << "sweeps_1c = " << sc.sweeps_1c << "\n"
      << "burn_in_fraction = " << format_double(sc.burn_in_fraction) << "\n"
      << "thin = " << sc.thin << "\n"
      << "init_cut_height = " << format_double(c.sampler.init_cut_height) << "\n"
      << "discount_rw_sd = " << format_double(c.sampler.discount_proposal.random_walk_sd) << "\n"
      << "discount_jump_prob = " << format_double(c.sampler.discount_proposal.jump_to_zero_prob) << "\n"
      << "debug_checks = " << b(c.sampler.debug_checks) << "\n\n"
      << "[selection]\n"
      << "sweeps = " << sel.sweeps << "\n"
      << "burn_in_fraction = " << format_double(sel.burn_in_fraction) << "\n"
      << "thin = " << sel.thin << "\n"
      << "g = " << format_double(sel.g_prior.g) << "\n"
      << "tau_shape = " << format_double(sel.tau_prior.shape) << "\n"
      << "tau_scale = " << format_double(sel.tau_prior.scale) << "\n"
      << "spline_order = " << sel.spline.order << "\n"
      << "spline_knots = " << sel.spline.knots << "\n"
      << "fdr_alpha = " << format_double(sel.fdr_alpha) << "\n\n"
      << "[simulate]\n"
      << "n = " << sim.n << "\n"
      << "p = " << format_list(sim.p) << "\n"
      << "discount = " << format_list(sim.discount) << "\n"
      << "alpha1 = " << format_double(sim.alpha1) << "\n"
      << "alpha3 = " << format_double(sim.alpha3) << "\n"
      << "alpha4 = " << format_double(sim.alpha4) << "\n"
      << "mu0 = " << format_double(sim.mu0) << "\n"
      << "tau0 = " << format_double(sim.tau0) << "\n"
      << "sigma = " << format_double(sim.sigma) << "\n"
      << "h = " << sim.h << "\n"
      << "truncation = " << sim.truncation << "\n"
      << "survival = " << b(c.simulate_survival) << "\n"
      << "survival_predictors = " << c.survival.num_predictors << "\n"
      << "survival_effect = " << format_double(c.survival.effect) << "\n"
      << "survival_censor_fraction = " << format_double(c.survival.censor_fraction) << "\n\n"
      << "[replicate]\n"
      << "h_values = " << format_list(rep.h_values) << "\n"
      << "sigma_values = " << format_list(rep.sigma_values) << "\n"
      << "replicates = " << rep.replicates << "\n"
      << "threads = " << rep.threads << "\n";
    return o.str();
}

TransformedDataset load_dataset(const RunConfig& config) {
    config.validate(true);
    TransformedDataset data;
    for (std::size_t t = 0; t < config.platforms.size(); ++t) {
        PlatformMatrix pm = load_platform(config.platforms[t].path, config.platforms[t].transform, config.clip_eps);
        pm.platform_id = static_cast<int>(t);
        if (t > 0 && pm.patient_ids != data.platforms.front().patient_ids)
            throw ParseError(config.platforms[t].path.string() +
                             ": patient ids differ from platform 1 (same ids in the same order required)");
        data.platforms.push_back(std::move(pm));
    }
    if (config.clinical)
        data.clinical = load_clinical(*config.clinical, data.platforms.front().patient_ids);
    data.validate();
    return data;
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

class Manifest {
  public:
    explicit Manifest(const fs::path& path) : out_(open_output(path)) {}
    void record(Json j) { out_ << j.dump() << '\n'; }

  private:
    std::ofstream out_;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void write_diagnostics(const fs::path& path, const std::vector<const ChainTrace*>& traces, int T) {
    auto out = open_output(path);
    out << "stage,sweep";
    for (int t = 0; t < T; ++t)
        out << ",K_" << t + 1;
    out << ",H";
    for (int t = 0; t < T; ++t)
        out << ",sigma_" << t + 1;
    for (int t = 0; t < T; ++t)
        out << ",discount_" << t + 1;
    out << ",live_atoms,log_posterior\n";
    for (const ChainTrace* trace : traces)
        for (const auto& d : trace->diagnostics) {
            out << to_string(d.stage) << ',' << d.sweep + 1;
            for (int k : d.K)
                out << ',' << k;
            out << ',' << d.H;
            for (int t = 0; t < T; ++t)
                out << ',' << format_double(d.sigma(t));
            for (double x : d.discount)
                out << ',' << format_double(x);
            out << ',' << d.live_atoms << ',' << format_double(d.log_posterior) << '\n';
        }
}

/// Order of items grouped by cluster label, stable within clusters.
std::vector<int> grouped_order(const Allocation& alloc) {
    std::vector<int> order(alloc.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return alloc[a] < alloc[b]; });
    return order;
}

void write_heatmap(const fs::path& path, const PlatformMatrix& pm, const Allocation& rows, const Allocation& cols) {
    const auto ro = grouped_order(rows);
    const auto co = grouped_order(cols);
    auto out = open_output(path);
    out << "patient_id,row_cluster";
    for (int j : co)
        out << ',' << csv_field(pm.probe_names[j]);
    out << "\ncolumn_cluster,";
    for (int j : co)
        out << ',' << cols[j] + 1;
    out << '\n';
    for (int i : ro) {
        out << csv_field(pm.patient_ids[i]) << ',' << rows[i] + 1;
        for (int j : co)
            out << ',' << format_double(pm.values(i, j));
        out << '\n';
    }
}

std::vector<std::string> cluster_names(int K, const std::string& prefix) {
    std::vector<std::string> names;
    for (int k = 0; k < K; ++k)
        names.push_back(prefix + std::to_string(k + 1));
    return names;
}

Json config_json(const RunConfig& config) { return Json{{"ini", format_config(config)}}; }

SelectionResult stage2(const TransformedDataset& data, const RunConfig& config, const ClusterState& state,
                       const LatentMatrices& latents, std::optional<SelectionProblem>& problem_out) {
    SelectionProblem problem;
    problem.data = &data;
    problem.clusters = merge_clusters(latents, state);
    problem.outcomes = *data.clinical;
    Rng rng = Rng(config.seed).split(2);
    SelectionResult result = run_selection(problem, config.selection, rng);
    {
        auto out = open_output(config.out_dir / "selection_report.csv");
        write_selection_report(out, problem, result);
    }
    problem_out = std::move(problem);
    return result;
}

} // namespace

PipelineResult run_pipeline(const RunConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    TransformedDataset data = load_dataset(config);
    const int T = data.num_platforms();
    fs::create_directories(config.out_dir);
    Manifest manifest(config.out_dir / "manifest.jsonl");
    manifest.record({{"event", "start"}, {"version", library_version()}, {"seed", config.seed}});
    manifest.record({{"event", "config"}, {"config", config_json(config)}});

    PipelineResult result;
    Rng rng = Rng(config.seed).split(1);
    const auto t1 = std::chrono::steady_clock::now();
    result.stage1 = run_stage1(data, config.sampler, rng);
    const Stage1Result& s1 = result.stage1;
    manifest.record({{"event", "stage1"},
                     {"seconds", seconds_since(t1)},
                     {"stream_seeds", {s1.trace_a.seed, s1.trace_b.seed, s1.trace_c.seed}},
                     {"discount_acceptance_1a", s1.trace_a.discount_acceptance}});

    const auto& out = config.out_dir;
    const auto& patients = data.platforms.front().patient_ids;
    write_allocation(out / "row_allocation.csv", s1.row_ls, patients, "patient_id");
    {
        std::vector<Allocation> rows;
        for (const auto& s : s1.trace_b.samples)
            rows.push_back(s.rows);
        const auto cc = pairwise_coclustering(rows, ItemKind::subject);
        write_matrix(out / "coclustering_rows.csv", cc.probs, patients, patients, "patient_id");
    }
    for (int t = 0; t < T; ++t) {
        const auto& pm = data.platforms[t];
        const std::string tag = std::to_string(t + 1);
        write_allocation(out / ("column_allocation_" + tag + ".csv"), s1.column_ls[t], pm.probe_names, "probe");
        std::vector<Allocation> cols;
        for (const auto& s : s1.trace_a.samples)
            cols.push_back(s.columns[t]);
        const auto cc = pairwise_coclustering(cols, ItemKind::probe);
        write_matrix(out / ("coclustering_columns_" + tag + ".csv"), cc.probs, pm.probe_names, pm.probe_names, "probe");
        const int H = static_cast<int>(s1.phi_mean[t].rows());
        const int K = static_cast<int>(s1.phi_mean[t].cols());
        write_matrix(out / ("phi_" + tag + ".csv"), s1.phi_mean[t], cluster_names(K, "column_cluster_"),
                     cluster_names(H, "row_cluster_"), "row_cluster");
        write_matrix(out / ("atom_ids_" + tag + ".csv"), s1.atom_ids[t]);
        write_heatmap(out / ("heatmap_" + tag + ".csv"), pm, s1.row_ls, s1.column_ls[t]);
    }
    {
        auto o = open_output(out / "sigma.csv");
        o << "platform,posterior_mean,posterior_median\n";
        for (int t = 0; t < T; ++t)
            o << t + 1 << ',' << format_double(s1.sigma_mean(t)) << ',' << format_double(s1.sigma_median(t)) << '\n';
    }
    write_diagnostics(out / "diagnostics.csv", {&s1.trace_a, &s1.trace_b, &s1.trace_c}, T);

    if (data.clinical) {
        const auto t2 = std::chrono::steady_clock::now();
        result.selection = stage2(data, config, s1.point_state(), s1.point_latents(), result.problem);
        // The problem keeps a pointer to data, which dies with this function.
        result.problem->data = nullptr;
        manifest.record({{"event", "stage2"},
                         {"seconds", seconds_since(t2)},
                         {"merged_clusters", result.problem->K()},
                         {"selected", result.selection->selection.selected},
                         {"ridge_jitter_events", result.selection->jitter_events}});
    } else {
        manifest.record({{"event", "stage2"}, {"skipped", "no clinical file"}});
    }
    manifest.record({{"event", "finish"}, {"seconds", seconds_since(start)}});
    return result;
}

SelectionResult run_selection_from_fit(const RunConfig& config, const fs::path& fit_dir) {
    TransformedDataset data = load_dataset(config);
    if (!data.clinical)
        throw ConfigError("select: the config names no clinical file");
    const int T = data.num_platforms();
    ClusterState state;
    LatentMatrices latents;
    state.row_alloc = canonicalize(read_allocation(fit_dir / "row_allocation.csv"));
    for (int t = 0; t < T; ++t) {
        const std::string tag = std::to_string(t + 1);
        state.column_alloc.push_back(canonicalize(read_allocation(fit_dir / ("column_allocation_" + tag + ".csv"))));
        latents.phi.push_back(read_matrix(fit_dir / ("phi_" + tag + ".csv"), true, true));
        latents.atom_ids.push_back(read_matrix(fit_dir / ("atom_ids_" + tag + ".csv"), false, false).cast<int>());
    }
    latents.sigma = VectorXd::Ones(T);
    check_dimensions(data, state, latents);
    fs::create_directories(config.out_dir);
    Manifest manifest(config.out_dir / "manifest.jsonl");
    manifest.record({{"event", "start"}, {"version", library_version()}, {"seed", config.seed}});
    manifest.record({{"event", "config"}, {"config", config_json(config)}, {"fit_dir", fit_dir.string()}});
    const auto t2 = std::chrono::steady_clock::now();
    std::optional<SelectionProblem> problem;
    SelectionResult result = stage2(data, config, state, latents, problem);
    manifest.record({{"event", "stage2"},
                     {"seconds", seconds_since(t2)},
                     {"merged_clusters", problem->K()},
                     {"selected", result.selection.selected}});
    return result;
}

void run_simulate(const RunConfig& config) {
    Rng rng = Rng(config.seed).split(3);
    const SyntheticData synth = generate_synthetic(config.simulation, rng);
    const auto& out = config.out_dir;
    fs::create_directories(out);
    RunConfig fit = config;
    fit.platforms.clear();
    fit.out_dir = "fit";
    fit.sampler = sampler_for_simulation(config.simulation, config.sampler);
    const auto& patients = synth.data.platforms.front().patient_ids;
    for (int t = 0; t < synth.data.num_platforms(); ++t) {
        const std::string tag = std::to_string(t + 1);
        const std::string file = "platform_" + tag + ".csv";
        write_platform(out / file, synth.data.platforms[t]);
        fit.platforms.push_back({file, Transform::identity});
        write_allocation(out / ("truth_column_allocation_" + tag + ".csv"), synth.truth.column_alloc[t],
                         synth.data.platforms[t].probe_names, "probe");
        write_matrix(out / ("truth_phi_" + tag + ".csv"), synth.truth.phi[t]);
    }
    write_allocation(out / "truth_row_allocation.csv", synth.truth.row_alloc, patients, "patient_id");
    if (config.simulate_survival) {
        Rng srng = Rng(config.seed).split(4);
        const SurvivalTruth surv = generate_survival(synth.data, config.survival, srng);
        write_clinical(out / "clinical.csv", surv.outcomes, patients);
        auto o = open_output(out / "truth_survival_predictors.csv");
        o << "platform,probe,coefficient\n";
        for (std::size_t k = 0; k < surv.predictors.size(); ++k)
            o << config.survival.platform + 1 << ','
              << csv_field(synth.data.platforms[config.survival.platform].probe_names[surv.predictors[k]]) << ','
              << format_double(surv.coefficients(static_cast<Eigen::Index>(k))) << '\n';
        fit.clinical = "clinical.csv";
    } else {
        fit.clinical.reset();
    }
    auto o = open_output(out / "fit.ini");
    o << format_config(fit);
}

std::vector<ReplicateResult> run_replicate_study(const RunConfig& config) {
    fs::create_directories(config.out_dir);
    Manifest manifest(config.out_dir / "manifest.jsonl");
    manifest.record({{"event", "start"}, {"version", library_version()}, {"seed", config.seed}});
    manifest.record({{"event", "config"}, {"config", config_json(config)}});
    const auto start = std::chrono::steady_clock::now();
    const auto results = run_replication_study(config.replication, config.seed);
    {
        auto o = open_output(config.out_dir / "replicates.csv");
        write_replication_csv(o, results, false);
    }
    {
        auto o = open_output(config.out_dir / "summary.csv");
        write_summary_csv(o, summarize(results));
    }
    Json seconds = Json::array();
    for (const auto& r : results)
        seconds.push_back(r.seconds);
    manifest.record({{"event", "finish"}, {"seconds", seconds_since(start)}, {"replicate_seconds", seconds}});
    return results;
}

} // namespace mobnp
