#include "mobnp/core_model.hpp"

#include <algorithm>
#include <set>

namespace mobnp {

Transform parse_transform(const std::string& name) {
    if (name == "identity")
        return Transform::identity;
    if (name == "logit")
        return Transform::logit;
    throw std::invalid_argument("unknown transform '" + name + "' (expected identity or logit)");
}

std::string to_string(Transform kind) {
    return kind == Transform::logit ? "logit" : "identity";
}

ClinicalOutcomes ClinicalOutcomes::from_times(const VectorXd& time, std::vector<int> event) {
    ClinicalOutcomes out;
    out.observed_time = time;
    out.event = std::move(event);
    out.log_time = time.unaryExpr([](double w) { return std::log(w); });
    out.validate();
    return out;
}

void ClinicalOutcomes::validate() const {
    if (static_cast<Eigen::Index>(event.size()) != observed_time.size() || log_time.size() != observed_time.size())
        throw StructuralError("clinical outcomes: length mismatch");
    for (int i = 0; i < n(); ++i) {
        if (!(observed_time(i) > 0.0) || !std::isfinite(observed_time(i)))
            throw DomainError("clinical outcomes: time must be positive (patient " + std::to_string(i + 1) + ")");
        if (event[i] != 0 && event[i] != 1)
            throw DomainError("clinical outcomes: event must be 0 or 1 (patient " + std::to_string(i + 1) + ")");
        const double lw = std::log(observed_time(i));
        if (event[i] == 1 && log_time(i) != lw)
            throw StructuralError("clinical outcomes: observed event with log_time != log(time)");
        if (event[i] == 0 && log_time(i) < lw)
            throw StructuralError("clinical outcomes: censored log_time below log(time)");
    }
}

void TransformedDataset::validate() const {
    if (platforms.empty())
        throw StructuralError("dataset: at least one platform is required");
    const int rows = n();
    if (rows < 2)
        throw StructuralError("dataset: at least two patients are required");
    const auto& ids = platforms.front().patient_ids;
    for (const auto& pm : platforms) {
        if (pm.n() != rows)
            throw StructuralError("dataset: platforms disagree on the number of patients");
        if (pm.p() < 1)
            throw StructuralError("dataset: platform " + std::to_string(pm.platform_id) + " has no probes");
        if (!pm.values.allFinite())
            throw DomainError("dataset: platform " + std::to_string(pm.platform_id) + " has non-finite values");
        if (!pm.probe_names.empty() && static_cast<int>(pm.probe_names.size()) != pm.p())
            throw StructuralError("dataset: probe name count mismatch");
        if (pm.patient_ids != ids)
            throw StructuralError("dataset: patient ids differ between platforms");
    }
    if (!ids.empty()) {
        if (static_cast<int>(ids.size()) != rows)
            throw StructuralError("dataset: patient id count mismatch");
        std::set<std::string> unique(ids.begin(), ids.end());
        if (static_cast<int>(unique.size()) != rows)
            throw StructuralError("dataset: duplicate patient ids");
    }
    if (clinical) {
        if (clinical->n() != rows)
            throw StructuralError("dataset: clinical outcomes do not cover every patient");
        clinical->validate();
    }
}

namespace {

int label_count(const Allocation& alloc) {
    int top = -1;
    for (int v : alloc)
        top = std::max(top, v);
    return top + 1;
}

void check_canonical(const Allocation& alloc, const char* what) {
    int next = 0;
    for (int v : alloc) {
        if (v < 0 || v > next)
            throw StructuralError(std::string(what) + ": labels are not canonical");
        if (v == next)
            ++next;
    }
}

} // namespace

int ClusterState::K(int t) const { return label_count(column_alloc.at(t)); }
int ClusterState::H() const { return label_count(row_alloc); }

void ClusterState::validate() const {
    for (const auto& c : column_alloc)
        check_canonical(c, "column allocation");
    check_canonical(row_alloc, "row allocation");
}

void Hyperparameters::validate() const {
    if (!(alpha1 > 0 && alpha2 > 0 && alpha3 > 0 && alpha4 > 0))
        throw ConfigError("hyperparameters: mass parameters must be positive");
    if (!(tau0 > 0))
        throw ConfigError("hyperparameters: tau0 must be positive");
    for (double d : discount)
        if (!(d >= 0.0 && d < 1.0))
            throw ConfigError("hyperparameters: discount must lie in [0,1)");
    if (!(sigma_prior.shape > 0 && sigma_prior.scale > 0))
        throw ConfigError("hyperparameters: sigma prior needs positive shape and scale");
}

void check_dimensions(const TransformedDataset& data, const ClusterState& state, const LatentMatrices& latents) {
    const int T = data.num_platforms();
    if (state.num_platforms() != T || latents.num_platforms() != T || latents.sigma.size() != T)
        throw StructuralError("platform count mismatch between data, state and latents");
    if (static_cast<int>(state.row_alloc.size()) != data.n())
        throw StructuralError("row allocation length differs from the number of patients");
    const int H = state.H();
    for (int t = 0; t < T; ++t) {
        if (static_cast<int>(state.column_alloc[t].size()) != data.platforms[t].p())
            throw StructuralError("column allocation length differs from the probe count");
        if (latents.phi[t].rows() < H || latents.phi[t].cols() < state.K(t))
            throw StructuralError("latent matrix smaller than the cluster counts");
        if (!(latents.sigma(t) > 0))
            throw StructuralError("noise sd must be positive");
    }
}

double dataset_log_likelihood(const TransformedDataset& data, const ClusterState& state,
                              const LatentMatrices& latents) {
    check_dimensions(data, state, latents);
    double total = 0.0;
    for (int t = 0; t < data.num_platforms(); ++t) {
        const auto& Z = data.platforms[t].values;
        const auto& phi = latents.phi[t];
        const double sigma = latents.sigma(t);
        const auto& cols = state.column_alloc[t];
        for (Eigen::Index j = 0; j < Z.cols(); ++j)
            for (Eigen::Index i = 0; i < Z.rows(); ++i)
                total += cell_log_likelihood(Z(i, j), phi(state.row_alloc[i], cols[j]), sigma);
    }
    return total;
}

} // namespace mobnp
