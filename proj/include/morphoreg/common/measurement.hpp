#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <string_view>

namespace morphoreg {

enum class MeasurementKind { Volume, Thickness, Curvature };

inline constexpr std::array<MeasurementKind, 3> kAllKinds{MeasurementKind::Volume, MeasurementKind::Thickness,
                                                          MeasurementKind::Curvature};

inline auto kind_name(MeasurementKind kind) -> std::string_view {
    switch (kind) {
        case MeasurementKind::Volume: return "volume";
        case MeasurementKind::Thickness: return "thickness";
        case MeasurementKind::Curvature: return "curvature";
    }
    return "unknown";
}

// Column prefix used in manifests: vol_, thk_, curv_.
inline auto kind_prefix(MeasurementKind kind) -> std::string_view {
    switch (kind) {
        case MeasurementKind::Volume: return "vol";
        case MeasurementKind::Thickness: return "thk";
        case MeasurementKind::Curvature: return "curv";
    }
    return "unknown";
}

inline auto kind_unit(MeasurementKind kind) -> std::string_view {
    switch (kind) {
        case MeasurementKind::Volume: return "mm^3";
        case MeasurementKind::Thickness: return "mm";
        case MeasurementKind::Curvature: return "1/mm";
    }
    return "";
}

inline auto parse_kind(std::string_view text) -> MeasurementKind {
    for (auto k : kAllKinds) {
        if (text == kind_name(k) || text == kind_prefix(k)) {
            return k;
        }
    }
    throw std::invalid_argument("unknown measurement kind '" + std::string(text) + "'");
}

// Kind from a column name such as "curv_q3".
inline auto kind_of_column(std::string_view column) -> MeasurementKind {
    const auto us = column.find('_');
    if (us == std::string_view::npos) {
        throw std::invalid_argument("measurement column '" + std::string(column) + "' lacks a kind prefix");
    }
    return parse_kind(column.substr(0, us));
}

}  // namespace morphoreg
