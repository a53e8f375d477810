// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace msense::sync {

/// Affine clock map: local = reference * (1 + drift) + offset.
struct ClockModel {
    double offset_s = 0.0;
    double drift = 0.0; // dimensionless (s/s)
    double valid_start_s = 0.0;
    double valid_end_s = 0.0;
    std::string reference_id = "reference";
    double residual_rms_s = 0.0;

    static ClockModel identity(double start = 0.0, double end = 0.0);
    std::vector<std::string> validate() const;
};

/// Least-squares affine fit from (local, reference) timestamp pairs.
ClockModel fit_clock_model(const std::vector<std::pair<double, double>>& local_reference_pairs);

struct MappedTime {
    double reference_s = 0.0;
    bool extrapolated = false; // outside the model's validity span
};

/// Inverse of the clock map: reference = (local - offset) / (1 + drift).
MappedTime to_reference(const ClockModel& model, double local_t);
double to_local(const ClockModel& model, double reference_t);

enum class Modality { Channel, Lidar, Image, Geolocation, Other };

std::string modality_name(Modality m);

/// One multi-rate stream: local timestamps, optional numeric payload rows
/// (interpolatable), and the clock model tying local time to the reference.
struct SampledStream {
    Modality modality = Modality::Other;
    std::string name;
    std::vector<double> local_t;
    std::vector<Eigen::VectorXd> values; // empty -> index-only stream (frames)
    ClockModel clock;
    double nominal_rate_hz = 0.0;
    bool interpolatable = false; // linear interpolation allowed (scalars/positions)

    std::vector<std::string> validate() const;
};

enum class SampleMethod { Exact, Interpolated, Nearest, Extrapolated, Absent };

std::string method_name(SampleMethod m);

struct AlignedSample {
    SampleMethod method = SampleMethod::Absent;
    int index = -1;           // source sample (Exact/Nearest) or left neighbor
    Eigen::VectorXd value;    // resolved payload (may be empty)
    double residual_s = 0.0;  // |grid instant - source instant| in reference time
};

struct AlignedTimeline {
    std::vector<double> reference_grid;
    std::vector<std::string> stream_names;
    std::map<std::string, std::vector<AlignedSample>> samples;
};

struct AlignParams {
    double exact_eps_s = 1e-9;
    double max_extrapolation_intervals = 1.0; // beyond this the modality is absent
};

/// Per grid instant, per stream: exact sample if within eps, else linear
/// interpolation between bracketing neighbors (interpolatable streams), else
/// nearest neighbor with its residual. Bounded extrapolation is tagged.
AlignedTimeline align(const std::vector<SampledStream>& streams,
                      const std::vector<double>& reference_grid, const AlignParams& params = {});

/// Wide delimited table (one row per grid instant, one column group per
/// stream).
void write_timeline_table(const AlignedTimeline& timeline, const std::string& path,
                          const std::map<std::string, std::string>& provenance = {});

} // namespace msense::sync
