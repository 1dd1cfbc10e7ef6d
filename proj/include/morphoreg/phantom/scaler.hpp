#pragma once

#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace morphoreg::phantom {

// Per-measurement min-max scaling, fit on the training split.
class Scaler {
public:
    Scaler() = default;
    Scaler(std::vector<std::string> names, std::vector<double> min, std::vector<double> max);

    // rows: one target vector per sample, each of size names.size().
    [[nodiscard]] static auto fit(std::vector<std::string> names, const std::vector<std::vector<double>>& rows)
        -> Scaler;

    [[nodiscard]] auto size() const -> std::size_t { return names_.size(); }
    [[nodiscard]] auto names() const -> const std::vector<std::string>& { return names_; }
    [[nodiscard]] auto min() const -> const std::vector<double>& { return min_; }
    [[nodiscard]] auto max() const -> const std::vector<double>& { return max_; }

    [[nodiscard]] auto apply(std::span<const double> values) const -> std::vector<double>;
    [[nodiscard]] auto invert(std::span<const double> scaled) const -> std::vector<double>;

    [[nodiscard]] auto to_json() const -> nlohmann::json;
    [[nodiscard]] static auto from_json(const nlohmann::json& j) -> Scaler;

private:
    std::vector<std::string> names_;
    std::vector<double> min_;
    std::vector<double> max_;
};

}  // namespace morphoreg::phantom
