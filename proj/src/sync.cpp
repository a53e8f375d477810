// SPDX-License-Identifier: Apache-2.0
#include "msense/sync.hpp"

#include <algorithm>
#include <cmath>

#include "msense/core/errors.hpp"
#include "msense/core/table.hpp"

namespace msense::sync {

ClockModel ClockModel::identity(double start, double end) {
    ClockModel m;
    m.valid_start_s = start;
    m.valid_end_s = end;
    return m;
}

std::vector<std::string> ClockModel::validate() const {
    std::vector<std::string> errors;
    if (std::abs(drift) >= 1e-3) errors.push_back("clock drift out of sanity bound (|drift| < 1e-3)");
    if (!(valid_end_s >= valid_start_s)) errors.push_back("clock validity span is empty");
    return errors;
}

ClockModel fit_clock_model(const std::vector<std::pair<double, double>>& pairs) {
    if (pairs.size() < 2) {
        throw ValidationError("fit_clock_model: need >= 2 timestamp pairs");
    }
    // local = reference*(1+drift) + offset: plain linear regression of local
    // on reference.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [local, ref] : pairs) {
        sx += ref;
        sy += local;
        sxx += ref * ref;
        sxy += ref * local;
    }
    const double n = static_cast<double>(pairs.size());
    const double denom = n * sxx - sx * sx;
    if (std::abs(denom) < 1e-30) {
        throw ValidationError("fit_clock_model: reference times must be distinct");
    }
    const double slope = (n * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / n;

    ClockModel model;
    model.drift = slope - 1.0;
    model.offset_s = intercept;
    double rss = 0.0;
    double lo = pairs.front().first, hi = pairs.front().first;
    for (const auto& [local, ref] : pairs) {
        const double r = local - (slope * ref + intercept);
        rss += r * r;
        lo = std::min(lo, local);
        hi = std::max(hi, local);
    }
    model.residual_rms_s = std::sqrt(rss / n);
    model.valid_start_s = lo;
    model.valid_end_s = hi;
    return model;
}

MappedTime to_reference(const ClockModel& model, double local_t) {
    MappedTime out;
    out.reference_s = (local_t - model.offset_s) / (1.0 + model.drift);
    out.extrapolated = local_t < model.valid_start_s || local_t > model.valid_end_s;
    return out;
}

double to_local(const ClockModel& model, double reference_t) {
    return reference_t * (1.0 + model.drift) + model.offset_s;
}

std::string modality_name(Modality m) {
    switch (m) {
        case Modality::Channel: return "channel";
        case Modality::Lidar: return "lidar";
        case Modality::Image: return "image";
        case Modality::Geolocation: return "geolocation";
        case Modality::Other: break;
    }
    return "other";
}

std::string method_name(SampleMethod m) {
    switch (m) {
        case SampleMethod::Exact: return "exact";
        case SampleMethod::Interpolated: return "interp";
        case SampleMethod::Nearest: return "nearest";
        case SampleMethod::Extrapolated: return "extrap";
        case SampleMethod::Absent: break;
    }
    return "absent";
}

std::vector<std::string> SampledStream::validate() const {
    std::vector<std::string> errors;
    for (std::size_t i = 1; i < local_t.size(); ++i) {
        if (!(local_t[i] > local_t[i - 1])) {
            errors.push_back(name + ": timestamps must be strictly increasing");
            break;
        }
    }
    if (!values.empty() && values.size() != local_t.size()) {
        errors.push_back(name + ": payload row count must match timestamps");
    }
    auto clock_errors = clock.validate();
    for (auto& e : clock_errors) errors.push_back(name + ": " + e);
    return errors;
}

AlignedTimeline align(const std::vector<SampledStream>& streams,
                      const std::vector<double>& reference_grid, const AlignParams& params) {
    AlignedTimeline out;
    out.reference_grid = reference_grid;

    for (const auto& stream : streams) {
        {
            const auto errors = stream.validate();
            if (!errors.empty()) throw ValidationError("align: " + errors.front());
        }
        out.stream_names.push_back(stream.name);
        auto& column = out.samples[stream.name];
        column.resize(reference_grid.size());
        if (stream.local_t.empty()) continue; // all Absent

        // Stream sample instants on the reference axis.
        std::vector<double> ref_t(stream.local_t.size());
        for (std::size_t i = 0; i < stream.local_t.size(); ++i) {
            ref_t[i] = to_reference(stream.clock, stream.local_t[i]).reference_s;
        }
        double max_gap = 0.0;
        for (std::size_t i = 1; i < ref_t.size(); ++i) max_gap = std::max(max_gap, ref_t[i] - ref_t[i - 1]);
        const double nominal_interval =
            stream.nominal_rate_hz > 0 ? 1.0 / stream.nominal_rate_hz : max_gap;

        for (std::size_t g = 0; g < reference_grid.size(); ++g) {
            const double t = reference_grid[g];
            AlignedSample sample;
            const auto it = std::lower_bound(ref_t.begin(), ref_t.end(), t);
            const auto hi = static_cast<std::size_t>(it - ref_t.begin());

            // Nearest sample and residual.
            std::size_t nearest = hi < ref_t.size() ? hi : ref_t.size() - 1;
            if (hi > 0 && (hi == ref_t.size() || std::abs(ref_t[hi - 1] - t) <= std::abs(ref_t[hi] - t))) {
                nearest = hi - 1;
            }
            const double residual = t - ref_t[nearest];

            const bool inside = t >= ref_t.front() && t <= ref_t.back();
            if (std::abs(residual) <= params.exact_eps_s) {
                sample.method = SampleMethod::Exact;
                sample.index = static_cast<int>(nearest);
                sample.residual_s = 0.0;
                if (!stream.values.empty()) sample.value = stream.values[nearest];
            } else if (inside && stream.interpolatable && !stream.values.empty()) {
                const std::size_t right = hi;
                const std::size_t left = hi - 1;
                const double span = ref_t[right] - ref_t[left];
                const double u = span > 0 ? (t - ref_t[left]) / span : 0.0;
                sample.method = SampleMethod::Interpolated;
                sample.index = static_cast<int>(left);
                sample.residual_s = 0.0;
                sample.value = (1.0 - u) * stream.values[left] + u * stream.values[right];
            } else if (inside) {
                sample.method = SampleMethod::Nearest;
                sample.index = static_cast<int>(nearest);
                sample.residual_s = residual;
                if (!stream.values.empty()) sample.value = stream.values[nearest];
            } else {
                // Outside support: bounded extrapolation, then absent.
                const double overshoot = t < ref_t.front() ? ref_t.front() - t : t - ref_t.back();
                if (overshoot <= params.max_extrapolation_intervals * nominal_interval) {
                    sample.method = SampleMethod::Extrapolated;
                    sample.index = static_cast<int>(nearest);
                    sample.residual_s = residual;
                    if (!stream.values.empty()) sample.value = stream.values[nearest];
                } else {
                    sample.method = SampleMethod::Absent;
                }
            }
            column[g] = std::move(sample);
        }
    }
    return out;
}

void write_timeline_table(const AlignedTimeline& timeline, const std::string& path,
                          const std::map<std::string, std::string>& provenance) {
    io::TableWriter table(path);
    for (const auto& [k, v] : provenance) table.comment(k, v);
    table.comment("units", "reference_t in seconds; residual in seconds");

    std::vector<std::string> cols{"reference_t"};
    for (const auto& name : timeline.stream_names) {
        cols.push_back(name + "_method");
        cols.push_back(name + "_index");
        cols.push_back(name + "_residual");
        const auto& column = timeline.samples.at(name);
        std::size_t dim = 0;
        for (const auto& s : column) dim = std::max<std::size_t>(dim, static_cast<std::size_t>(s.value.size()));
        for (std::size_t d = 0; d < dim; ++d) {
            cols.push_back(name + "_v" + std::to_string(d));
        }
    }
    table.columns(cols);

    for (std::size_t g = 0; g < timeline.reference_grid.size(); ++g) {
        table.cell(timeline.reference_grid[g]);
        for (const auto& name : timeline.stream_names) {
            const auto& column = timeline.samples.at(name);
            const auto& s = column[g];
            table.cell(method_name(s.method));
            table.cell(static_cast<long long>(s.index));
            table.cell(s.residual_s);
            std::size_t dim = 0;
            for (const auto& e : column) dim = std::max<std::size_t>(dim, static_cast<std::size_t>(e.value.size()));
            for (std::size_t d = 0; d < dim; ++d) {
                table.cell(d < static_cast<std::size_t>(s.value.size())
                               ? s.value(static_cast<Eigen::Index>(d))
                               : 0.0);
            }
        }
        table.end_row();
    }
    table.close();
}

} // namespace msense::sync
