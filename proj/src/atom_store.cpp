#include "mobnp/atom_store.hpp"

#include "mobnp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace mobnp {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_normal_density(double x, double mean, double sd) {
    const double r = (x - mean) / sd;
    return -0.5 * kLog2Pi - std::log(sd) - 0.5 * r * r;
}

} // namespace

double block_log_likelihood(const CellStats& s, double theta, double sigma) {
    const double var = sigma * sigma;
    return -0.5 * s.count * (kLog2Pi + std::log(var)) - (s.sumsq - 2.0 * theta * s.sum + s.count * theta * theta) / (2.0 * var);
}

double block_log_marginal(const CellStats& s, double sigma, double mu0, double tau0) {
    const double var = sigma * sigma;
    const double prior_prec = 1.0 / (tau0 * tau0);
    const double prec = prior_prec + s.count / var;
    const double mean = (mu0 * prior_prec + s.sum / var) / prec;
    return -0.5 * s.count * (kLog2Pi + std::log(var)) - s.sumsq / (2.0 * var) - 0.5 * mu0 * mu0 * prior_prec +
           0.5 * mean * mean * prec - 0.5 * std::log(prec / prior_prec);
}

NormalPosterior atom_posterior(double prior_mean, double prior_sd, double weighted_sum, double weighted_count) {
    const double prior_prec = 1.0 / (prior_sd * prior_sd);
    const double prec = prior_prec + weighted_count;
    return {(prior_mean * prior_prec + weighted_sum) / prec, 1.0 / std::sqrt(prec)};
}

double CellPredictive::log_marginal(const CellStats& s, double sigma) const {
    // Each atom term is lw_l + c - kappa (theta_l - xbar)^2 with c shared.
    const double var = sigma * sigma;
    const double xbar = s.sum / s.count;
    const double kappa = s.count / (2.0 * var);
    const double c = -0.5 * s.count * (kLog2Pi + std::log(var)) - (s.sumsq - s.sum * xbar) / (2.0 * var);
    const std::size_t L = values.size();
    thread_local std::vector<double> terms;
    terms.resize(L + 1);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < L; ++l) {
        const double d = values[l] - xbar;
        terms[l] = log_weights[l] - kappa * d * d;
        top = std::max(top, terms[l]);
    }
    terms[L] = std::isfinite(log_weight_new) ? log_weight_new + block_log_marginal(s, sigma, mu0, tau0) - c
                                             : -std::numeric_limits<double>::infinity();
    top = std::max(top, terms[L]);
    // Terms more than 40 nats below the top change the sum by under 1e-17 relative.
    const double floor = top - 40.0;
    double total = 0.0;
    for (std::size_t l = 0; l <= L; ++l)
        if (terms[l] > floor)
            total += std::exp(terms[l] - top);
    return c + top + std::log(total);
}

AtomStore AtomStore::hierarchical(int num_platforms, double alpha3, double alpha4, double mu0, double tau0) {
    AtomStore s;
    s.mode_ = Mode::hierarchical;
    s.alpha3_ = alpha3;
    s.alpha4_ = alpha4;
    s.mu0_ = mu0;
    s.tau0_ = tau0;
    s.tables_.resize(num_platforms);
    s.free_tables_.resize(num_platforms);
    s.customers_.assign(num_platforms, 0);
    s.cells_.resize(num_platforms);
    s.values_.resize(num_platforms);
    return s;
}

AtomStore AtomStore::fixed(int num_platforms, const DiscreteMeasure& measure) {
    if (measure.atoms.empty() || measure.atoms.size() != measure.weights.size())
        throw StructuralError("AtomStore::fixed: measure needs matching non-empty atoms and weights");
    AtomStore s;
    s.mode_ = Mode::fixed;
    s.tables_.resize(num_platforms);
    s.free_tables_.resize(num_platforms);
    s.customers_.assign(num_platforms, 0);
    s.cells_.resize(num_platforms);
    s.values_.resize(num_platforms);
    double total = 0.0;
    for (double w : measure.weights)
        total += w;
    for (std::size_t l = 0; l < measure.atoms.size(); ++l) {
        s.atoms_.push_back({measure.atoms[l], 0, true});
        s.fixed_log_weights_.push_back(std::log(measure.weights[l] / total));
    }
    return s;
}

int AtomStore::new_atom(double value) {
    int a;
    if (!free_atoms_.empty()) {
        a = free_atoms_.back();
        free_atoms_.pop_back();
    } else {
        a = static_cast<int>(atoms_.size());
        atoms_.emplace_back();
    }
    atoms_[a] = {value, 0, true};
    return a;
}

void AtomStore::release_atom(int a) {
    atoms_[a].alive = false;
    atoms_[a].tables = 0;
    free_atoms_.push_back(a);
}

int AtomStore::new_table(int t, int atom) {
    int b;
    auto& tabs = tables_[t];
    if (!free_tables_[t].empty()) {
        b = free_tables_[t].back();
        free_tables_[t].pop_back();
    } else {
        b = static_cast<int>(tabs.size());
        tabs.emplace_back();
    }
    tabs[b] = {atom, 0, true};
    ++atoms_[atom].tables;
    ++total_tables_;
    return b;
}

void AtomStore::add_customer(int t, int handle) {
    ++customers_[t];
    if (mode_ == Mode::hierarchical)
        ++tables_[t][handle].customers;
}

void AtomStore::remove_customer(int t, int handle) {
    --customers_[t];
    if (mode_ != Mode::hierarchical)
        return;
    Table& tab = tables_[t][handle];
    if (--tab.customers > 0)
        return;
    tab.alive = false;
    free_tables_[t].push_back(handle);
    --total_tables_;
    if (--atoms_[tab.atom].tables == 0)
        release_atom(tab.atom);
}

int AtomStore::handle_atom(int t, int handle) const {
    return mode_ == Mode::hierarchical ? tables_[t][handle].atom : handle;
}

int AtomStore::atom_id(int t, int h, int k) const { return handle_atom(t, cells_[t][k][h]); }

MatrixXd AtomStore::phi(int t) const {
    MatrixXd out(rows_, cols(t));
    for (int k = 0; k < cols(t); ++k)
        for (int h = 0; h < rows_; ++h)
            out(h, k) = values_[t][k][h];
    return out;
}

MatrixXi AtomStore::atom_ids(int t) const {
    MatrixXi out(rows_, cols(t));
    for (int k = 0; k < cols(t); ++k)
        for (int h = 0; h < rows_; ++h)
            out(h, k) = atom_id(t, h, k);
    return out;
}

int AtomStore::num_live_atoms() const {
    return static_cast<int>(std::count_if(atoms_.begin(), atoms_.end(), [](const Atom& a) { return a.alive; }));
}

int AtomStore::num_tables(int t) const {
    return static_cast<int>(
        std::count_if(tables_[t].begin(), tables_[t].end(), [](const Table& b) { return b.alive; }));
}

int AtomStore::num_distinct_values(int t) const {
    std::set<int> ids;
    for (const auto& col : cells_[t])
        for (int handle : col)
            ids.insert(handle_atom(t, handle));
    return static_cast<int>(ids.size());
}

CellPredictive AtomStore::predictive(int t) const {
    CellPredictive pred;
    pred.mu0 = mu0_;
    pred.tau0 = tau0_;
    if (mode_ == Mode::fixed) {
        for (std::size_t l = 0; l < atoms_.size(); ++l) {
            pred.atoms.push_back(static_cast<int>(l));
            pred.values.push_back(atoms_[l].value);
            pred.log_weights.push_back(fixed_log_weights_[l]);
        }
        return pred;
    }
    std::vector<double> local(atoms_.size(), 0.0);
    for (const auto& tab : tables_[t])
        if (tab.alive)
            local[tab.atom] += tab.customers;
    const double denom = customers_[t] + alpha3_;
    const double global_denom = total_tables_ + alpha4_;
    for (std::size_t l = 0; l < atoms_.size(); ++l) {
        if (!atoms_[l].alive)
            continue;
        const double w = (local[l] + alpha3_ * atoms_[l].tables / global_denom) / denom;
        pred.atoms.push_back(static_cast<int>(l));
        pred.values.push_back(atoms_[l].value);
        pred.log_weights.push_back(std::log(w));
    }
    pred.log_weight_new = std::log(alpha3_ * alpha4_ / (global_denom * denom));
    return pred;
}

int AtomStore::seat_at_atom(int t, int atom, Rng& rng) {
    if (mode_ == Mode::fixed) {
        add_customer(t, atom);
        return atom;
    }
    thread_local std::vector<int> candidates;
    thread_local std::vector<double> weights;
    candidates.clear();
    weights.clear();
    const auto& tabs = tables_[t];
    for (std::size_t b = 0; b < tabs.size(); ++b)
        if (tabs[b].alive && tabs[b].atom == atom) {
            candidates.push_back(static_cast<int>(b));
            weights.push_back(tabs[b].customers);
        }
    candidates.push_back(-1);
    weights.push_back(alpha3_ * atoms_[atom].tables / (total_tables_ + alpha4_));
    int b = candidates[rng.categorical(weights)];
    if (b < 0)
        b = new_table(t, atom);
    add_customer(t, b);
    return b;
}

int AtomStore::seat_given_data(int t, const CellStats& s, double sigma, Rng& rng) {
    const CellPredictive pred = predictive(t);
    const std::size_t L = pred.values.size();
    thread_local std::vector<double> lw;
    lw.resize(L + 1);
    for (std::size_t l = 0; l < L; ++l)
        lw[l] = pred.log_weights[l] + block_log_likelihood(s, pred.values[l], sigma);
    lw[L] = std::isfinite(pred.log_weight_new) ? pred.log_weight_new + block_log_marginal(s, sigma, mu0_, tau0_)
                                               : -std::numeric_limits<double>::infinity();
    const int pick = rng.categorical_log(lw);
    if (pick < static_cast<int>(L))
        return seat_at_atom(t, pred.atoms[pick], rng);
    const auto post = atom_posterior(mu0_, tau0_, s.sum / (sigma * sigma), s.count / (sigma * sigma));
    const int a = new_atom(rng.normal(post.mean, post.sd));
    const int b = new_table(t, a);
    add_customer(t, b);
    return b;
}

void AtomStore::add_column(int t, std::span<const CellStats> stats_by_row, double sigma, Rng& rng) {
    if (static_cast<int>(stats_by_row.size()) != rows_)
        throw StructuralError("AtomStore::add_column: one statistic per row cluster is required");
    std::vector<int> handles(rows_);
    std::vector<double> vals(rows_);
    for (int h = 0; h < rows_; ++h) {
        handles[h] = seat_given_data(t, stats_by_row[h], sigma, rng);
        vals[h] = handle_value(t, handles[h]);
    }
    cells_[t].push_back(std::move(handles));
    values_[t].push_back(std::move(vals));
}

void AtomStore::add_row(const std::vector<std::vector<CellStats>>& stats_by_platform_col,
                        std::span<const double> sigma, Rng& rng) {
    for (int t = 0; t < num_platforms(); ++t) {
        if (static_cast<int>(stats_by_platform_col[t].size()) != cols(t))
            throw StructuralError("AtomStore::add_row: one statistic per column cluster is required");
        for (int k = 0; k < cols(t); ++k) {
            const int handle = seat_given_data(t, stats_by_platform_col[t][k], sigma[t], rng);
            cells_[t][k].push_back(handle);
            values_[t][k].push_back(handle_value(t, handle));
        }
    }
    ++rows_;
}

void AtomStore::reset_grid(int rows, std::span<const int> cols) {
    if (static_cast<int>(cols.size()) != num_platforms())
        throw StructuralError("AtomStore::reset_grid: platform count mismatch");
    if (mode_ == Mode::hierarchical) {
        atoms_.clear();
        free_atoms_.clear();
        total_tables_ = 0;
        for (int t = 0; t < num_platforms(); ++t) {
            tables_[t].clear();
            free_tables_[t].clear();
        }
    }
    std::fill(customers_.begin(), customers_.end(), 0);
    rows_ = rows;
    for (int t = 0; t < num_platforms(); ++t) {
        cells_[t].assign(cols[t], std::vector<int>(rows, -1));
        values_[t].assign(cols[t], std::vector<double>(rows, 0.0));
    }
}

void AtomStore::set_cell_value(int t, int h, int k, double value) {
    if (mode_ != Mode::hierarchical)
        throw StructuralError("set_cell_value requires hierarchical mode");
    if (cells_[t][k][h] >= 0)
        remove_customer(t, cells_[t][k][h]);
    int a = -1;
    for (std::size_t l = 0; l < atoms_.size(); ++l)
        if (atoms_[l].alive && atoms_[l].value == value) {
            a = static_cast<int>(l);
            break;
        }
    int b = -1;
    if (a < 0) {
        a = new_atom(value);
    } else {
        for (std::size_t c = 0; c < tables_[t].size(); ++c)
            if (tables_[t][c].alive && tables_[t][c].atom == a) {
                b = static_cast<int>(c);
                break;
            }
    }
    if (b < 0)
        b = new_table(t, a);
    add_customer(t, b);
    cells_[t][k][h] = b;
    values_[t][k][h] = value;
}

namespace {

int draw_prior_component(const CellPredictive& pred, Rng& rng) {
    std::vector<double> lw = pred.log_weights;
    lw.push_back(pred.log_weight_new);
    return rng.categorical_log(lw);
}

} // namespace

void AtomStore::add_prior_row(Rng& rng) {
    for (int t = 0; t < num_platforms(); ++t)
        for (int k = 0; k < cols(t); ++k) {
            const CellPredictive pred = predictive(t);
            const int pick = draw_prior_component(pred, rng);
            int handle;
            if (pick < static_cast<int>(pred.atoms.size())) {
                handle = seat_at_atom(t, pred.atoms[pick], rng);
            } else {
                handle = new_table(t, new_atom(rng.normal(mu0_, tau0_)));
                add_customer(t, handle);
            }
            cells_[t][k].push_back(handle);
            values_[t][k].push_back(handle_value(t, handle));
        }
    ++rows_;
}

void AtomStore::add_prior_column(int t, Rng& rng) {
    std::vector<int> handles(rows_);
    std::vector<double> vals(rows_);
    for (int h = 0; h < rows_; ++h) {
        const CellPredictive pred = predictive(t);
        const int pick = draw_prior_component(pred, rng);
        if (pick < static_cast<int>(pred.atoms.size())) {
            handles[h] = seat_at_atom(t, pred.atoms[pick], rng);
        } else {
            handles[h] = new_table(t, new_atom(rng.normal(mu0_, tau0_)));
            add_customer(t, handles[h]);
        }
        vals[h] = handle_value(t, handles[h]);
    }
    cells_[t].push_back(std::move(handles));
    values_[t].push_back(std::move(vals));
}

void AtomStore::remove_column(int t, int k) {
    for (int handle : cells_[t][k])
        remove_customer(t, handle);
    cells_[t].erase(cells_[t].begin() + k);
    values_[t].erase(values_[t].begin() + k);
}

void AtomStore::remove_row(int h) {
    for (int t = 0; t < num_platforms(); ++t)
        for (int k = 0; k < cols(t); ++k) {
            remove_customer(t, cells_[t][k][h]);
            cells_[t][k].erase(cells_[t][k].begin() + h);
            values_[t][k].erase(values_[t][k].begin() + h);
        }
    --rows_;
}

void AtomStore::permute_columns(int t, std::span<const int> new_of_old) {
    std::vector<std::vector<int>> cells(cols(t));
    std::vector<std::vector<double>> vals(cols(t));
    for (int k = 0; k < cols(t); ++k) {
        cells[new_of_old[k]] = std::move(cells_[t][k]);
        vals[new_of_old[k]] = std::move(values_[t][k]);
    }
    cells_[t] = std::move(cells);
    values_[t] = std::move(vals);
}

void AtomStore::permute_rows(std::span<const int> new_of_old) {
    for (int t = 0; t < num_platforms(); ++t)
        for (int k = 0; k < cols(t); ++k) {
            std::vector<int> cells(rows_);
            std::vector<double> vals(rows_);
            for (int h = 0; h < rows_; ++h) {
                cells[new_of_old[h]] = cells_[t][k][h];
                vals[new_of_old[h]] = values_[t][k][h];
            }
            cells_[t][k] = std::move(cells);
            values_[t][k] = std::move(vals);
        }
}

void AtomStore::refresh_values() {
    for (int t = 0; t < num_platforms(); ++t)
        for (int k = 0; k < cols(t); ++k)
            for (int h = 0; h < rows_; ++h)
                values_[t][k][h] = handle_value(t, cells_[t][k][h]);
}

void AtomStore::update(const std::vector<std::vector<std::vector<CellStats>>>& stats, std::span<const double> sigma,
                       Rng& rng) {
    if (mode_ == Mode::fixed) {
        const std::size_t L = atoms_.size();
        std::vector<double> lw(L);
        for (int t = 0; t < num_platforms(); ++t)
            for (int k = 0; k < cols(t); ++k)
                for (int h = 0; h < rows_; ++h) {
                    for (std::size_t l = 0; l < L; ++l)
                        lw[l] = fixed_log_weights_[l] + block_log_likelihood(stats[t][k][h], atoms_[l].value, sigma[t]);
                    cells_[t][k][h] = rng.categorical_log(lw);
                }
        refresh_values();
        return;
    }
    for (int t = 0; t < num_platforms(); ++t)
        resample_tables(t, stats[t], sigma[t], rng);
    resample_dishes(stats, sigma, rng);
    resample_atom_values(stats, sigma, rng);
    refresh_values();
}

void AtomStore::resample_tables(int t, const std::vector<std::vector<CellStats>>& stats, double sigma, Rng& rng) {
    std::vector<double> atom_ll(atoms_.size());
    std::vector<double> lw;
    std::vector<int> option;    // table id, or -(1 + atom) for a new table on that atom, or INT_MIN for a new atom
    constexpr int kNewAtom = std::numeric_limits<int>::min();
    for (int k = 0; k < cols(t); ++k)
        for (int h = 0; h < rows_; ++h) {
            const CellStats& s = stats[k][h];
            remove_customer(t, cells_[t][k][h]);
            atom_ll.resize(atoms_.size());
            for (std::size_t l = 0; l < atoms_.size(); ++l)
                if (atoms_[l].alive)
                    atom_ll[l] = block_log_likelihood(s, atoms_[l].value, sigma);
            lw.clear();
            option.clear();
            const auto& tabs = tables_[t];
            for (std::size_t b = 0; b < tabs.size(); ++b)
                if (tabs[b].alive) {
                    lw.push_back(std::log(static_cast<double>(tabs[b].customers)) + atom_ll[tabs[b].atom]);
                    option.push_back(static_cast<int>(b));
                }
            const double log_new_table = std::log(alpha3_) - std::log(total_tables_ + alpha4_);
            for (std::size_t l = 0; l < atoms_.size(); ++l)
                if (atoms_[l].alive) {
                    lw.push_back(log_new_table + std::log(static_cast<double>(atoms_[l].tables)) + atom_ll[l]);
                    option.push_back(-1 - static_cast<int>(l));
                }
            lw.push_back(log_new_table + std::log(alpha4_) + block_log_marginal(s, sigma, mu0_, tau0_));
            option.push_back(kNewAtom);

            const int pick = option[rng.categorical_log(lw)];
            int b;
            if (pick >= 0) {
                b = pick;
            } else if (pick == kNewAtom) {
                const auto post = atom_posterior(mu0_, tau0_, s.sum / (sigma * sigma), s.count / (sigma * sigma));
                b = new_table(t, new_atom(rng.normal(post.mean, post.sd)));
            } else {
                b = new_table(t, -1 - pick);
            }
            add_customer(t, b);
            cells_[t][k][h] = b;
        }
}

void AtomStore::resample_dishes(const std::vector<std::vector<std::vector<CellStats>>>& stats,
                                std::span<const double> sigma, Rng& rng) {
    std::vector<double> lw;
    std::vector<int> option;
    for (int t = 0; t < num_platforms(); ++t) {
        std::vector<CellStats> table_stats(tables_[t].size());
        for (int k = 0; k < cols(t); ++k)
            for (int h = 0; h < rows_; ++h)
                table_stats[cells_[t][k][h]] += stats[t][k][h];
        for (std::size_t b = 0; b < tables_[t].size(); ++b) {
            Table& tab = tables_[t][b];
            if (!tab.alive)
                continue;
            const CellStats& s = table_stats[b];
            if (--atoms_[tab.atom].tables == 0)
                release_atom(tab.atom);
            --total_tables_;
            lw.clear();
            option.clear();
            for (std::size_t l = 0; l < atoms_.size(); ++l)
                if (atoms_[l].alive) {
                    lw.push_back(std::log(static_cast<double>(atoms_[l].tables)) +
                                 block_log_likelihood(s, atoms_[l].value, sigma[t]));
                    option.push_back(static_cast<int>(l));
                }
            lw.push_back(std::log(alpha4_) + block_log_marginal(s, sigma[t], mu0_, tau0_));
            option.push_back(-1);
            int a = option[rng.categorical_log(lw)];
            if (a < 0) {
                const double var = sigma[t] * sigma[t];
                const auto post = atom_posterior(mu0_, tau0_, s.sum / var, s.count / var);
                a = new_atom(rng.normal(post.mean, post.sd));
            }
            tab.atom = a;
            ++atoms_[a].tables;
            ++total_tables_;
        }
    }
}

void AtomStore::resample_atom_values(const std::vector<std::vector<std::vector<CellStats>>>& stats,
                                     std::span<const double> sigma, Rng& rng) {
    std::vector<double> wsum(atoms_.size(), 0.0), wcount(atoms_.size(), 0.0);
    for (int t = 0; t < num_platforms(); ++t) {
        const double var = sigma[t] * sigma[t];
        for (int k = 0; k < cols(t); ++k)
            for (int h = 0; h < rows_; ++h) {
                const int a = handle_atom(t, cells_[t][k][h]);
                wsum[a] += stats[t][k][h].sum / var;
                wcount[a] += stats[t][k][h].count / var;
            }
    }
    for (std::size_t l = 0; l < atoms_.size(); ++l) {
        if (!atoms_[l].alive)
            continue;
        const auto post = atom_posterior(mu0_, tau0_, wsum[l], wcount[l]);
        atoms_[l].value = rng.normal(post.mean, post.sd);
    }
}

double AtomStore::log_prior() const {
    double lp = 0.0;
    if (mode_ == Mode::fixed) {
        for (int t = 0; t < num_platforms(); ++t)
            for (const auto& col : cells_[t])
                for (int handle : col)
                    lp += fixed_log_weights_[handle];
        return lp;
    }
    for (int t = 0; t < num_platforms(); ++t) {
        int T = 0;
        for (const auto& tab : tables_[t])
            if (tab.alive) {
                ++T;
                lp += std::lgamma(static_cast<double>(tab.customers));
            }
        lp += T * std::log(alpha3_) - std::lgamma(alpha3_ + customers_[t]) + std::lgamma(alpha3_);
    }
    int L = 0;
    for (const auto& a : atoms_)
        if (a.alive) {
            ++L;
            lp += std::lgamma(static_cast<double>(a.tables)) + log_normal_density(a.value, mu0_, tau0_);
        }
    lp += L * std::log(alpha4_) - std::lgamma(alpha4_ + total_tables_) + std::lgamma(alpha4_);
    return lp;
}

void AtomStore::check_invariants() const {
    const int T = num_platforms();
    std::vector<int> atom_tables(atoms_.size(), 0);
    int tables_total = 0;
    for (int t = 0; t < T; ++t) {
        std::vector<int> count(tables_[t].size(), 0);
        int customers = 0;
        if (static_cast<int>(values_[t].size()) != cols(t))
            throw StructuralError("AtomStore: value cache shape mismatch");
        for (int k = 0; k < cols(t); ++k) {
            if (static_cast<int>(cells_[t][k].size()) != rows_ || static_cast<int>(values_[t][k].size()) != rows_)
                throw StructuralError("AtomStore: ragged cell grid");
            for (int h = 0; h < rows_; ++h) {
                const int handle = cells_[t][k][h];
                ++customers;
                if (mode_ == Mode::hierarchical) {
                    if (handle < 0 || handle >= static_cast<int>(tables_[t].size()) || !tables_[t][handle].alive)
                        throw StructuralError("AtomStore: cell references a dead table");
                    ++count[handle];
                } else if (handle < 0 || handle >= static_cast<int>(atoms_.size())) {
                    throw StructuralError("AtomStore: cell references an unknown atom");
                }
                const int a = handle_atom(t, handle);
                if (!atoms_[a].alive)
                    throw StructuralError("AtomStore: cell references a dead atom");
                if (values_[t][k][h] != atoms_[a].value)
                    throw StructuralError("AtomStore: cached cell value differs from its atom");
            }
        }
        if (customers != customers_[t])
            throw StructuralError("AtomStore: customer total mismatch");
        if (mode_ != Mode::hierarchical)
            continue;
        for (std::size_t b = 0; b < tables_[t].size(); ++b) {
            const Table& tab = tables_[t][b];
            if (!tab.alive)
                continue;
            if (tab.customers != count[b] || tab.customers == 0)
                throw StructuralError("AtomStore: table customer count mismatch");
            if (tab.atom < 0 || !atoms_[tab.atom].alive)
                throw StructuralError("AtomStore: table serves a dead atom");
            ++atom_tables[tab.atom];
            ++tables_total;
        }
    }
    if (mode_ != Mode::hierarchical)
        return;
    if (tables_total != total_tables_)
        throw StructuralError("AtomStore: table total mismatch");
    for (std::size_t l = 0; l < atoms_.size(); ++l)
        if (atoms_[l].alive && (atoms_[l].tables != atom_tables[l] || atom_tables[l] == 0))
            throw StructuralError("AtomStore: atom table count mismatch");
}

} // namespace mobnp
