#include "morphoreg/phantom/scaler.hpp"

#include "morphoreg/phantom/volume.hpp"

#include <algorithm>

namespace morphoreg::phantom {

Scaler::Scaler(std::vector<std::string> names, std::vector<double> min, std::vector<double> max)
    : names_(std::move(names)), min_(std::move(min)), max_(std::move(max)) {
    if (min_.size() != names_.size() || max_.size() != names_.size()) {
        throw PhantomError("scaler needs one (min, max) pair per measurement");
    }
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (!(max_[i] > min_[i])) {
            throw PhantomError("measurement '" + names_[i] + "' has max <= min in the training split; cannot scale");
        }
    }
}

auto Scaler::fit(std::vector<std::string> names, const std::vector<std::vector<double>>& rows) -> Scaler {
    if (rows.empty()) {
        throw PhantomError("cannot fit a scaler on an empty training split");
    }
    std::vector<double> lo(names.size(), INFINITY), hi(names.size(), -INFINITY);
    for (const auto& r : rows) {
        if (r.size() != names.size()) {
            throw PhantomError("target row has " + std::to_string(r.size()) + " values, expected " +
                               std::to_string(names.size()));
        }
        for (std::size_t i = 0; i < r.size(); ++i) {
            lo[i] = std::min(lo[i], r[i]);
            hi[i] = std::max(hi[i], r[i]);
        }
    }
    return Scaler(std::move(names), std::move(lo), std::move(hi));
}

auto Scaler::apply(std::span<const double> values) const -> std::vector<double> {
    if (values.size() != size()) {
        throw PhantomError("scaler expects " + std::to_string(size()) + " values, got " +
                           std::to_string(values.size()));
    }
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = (values[i] - min_[i]) / (max_[i] - min_[i]);
    }
    return out;
}

auto Scaler::invert(std::span<const double> scaled) const -> std::vector<double> {
    if (scaled.size() != size()) {
        throw PhantomError("scaler expects " + std::to_string(size()) + " values, got " +
                           std::to_string(scaled.size()));
    }
    std::vector<double> out(scaled.size());
    for (std::size_t i = 0; i < scaled.size(); ++i) {
        out[i] = min_[i] + scaled[i] * (max_[i] - min_[i]);
    }
    return out;
}

auto Scaler::to_json() const -> nlohmann::json {
    return {{"names", names_}, {"min", min_}, {"max", max_}};
}

auto Scaler::from_json(const nlohmann::json& j) -> Scaler {
    return Scaler(j.at("names").get<std::vector<std::string>>(), j.at("min").get<std::vector<double>>(),
                  j.at("max").get<std::vector<double>>());
}

}  // namespace morphoreg::phantom
