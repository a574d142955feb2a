#ifndef EVSNN_PERF_HPP
#define EVSNN_PERF_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "evsnn/types.hpp"

namespace evsnn {

class UnknownStage : public Error {
public:
    using Error::Error;
};
class MissingStage : public Error {
public:
    using Error::Error;
};
class InstrumentationMissing : public Error {
public:
    using Error::Error;
};
class InvalidProfile : public Error {
public:
    using Error::Error;
};

// The three chip power domains the pipeline runs across.
enum class Component { FabricController = 0, Cluster = 1, Sne = 2 };
enum class Stage { Acquisition = 0, Preprocessing = 1, Inference = 2 };

constexpr int kComponentCount = 3;
std::string_view component_name(Component c);
std::string_view stage_name(Stage s);
Component stage_component(Stage s);

// Per-domain idle/active power in mW.
struct PowerProfile {
    double idle_mw[kComponentCount] = {0, 0, 0};
    double active_mw[kComponentCount] = {0, 0, 0};
    std::string supply_note;

    // The measured operating point: idle {3.5, 6.5, 7.7} mW and active
    // {3.8, 34, 44} mW at VDD = 0.65 V.
    static PowerProfile reference();
    static PowerProfile parse(std::string_view text);
    static PowerProfile load(const std::filesystem::path& path);
    std::string emit() const;
    void validate() const; // powers positive, idle <= active
};

struct StageMetrics {
    Stage stage = Stage::Acquisition;
    Component active_component = Component::FabricController;
    double duration_ms = 0;
    double active_energy_mj = 0;       // P_active(component) * t
    double idle_energy_others_mj = 0;  // sum of P_idle over the other domains * t

    bool operator==(const StageMetrics&) const = default;
};

StageMetrics stage_energy(const PowerProfile& profile, Stage stage,
                          double duration_ms);

struct StageDurations {
    double acquisition_ms = 0;
    double preprocessing_ms = 0;
    double inference_ms = 0;
};

// The measured stage times: 1.5 / 131 / 32 ms.
StageDurations paper_replay_durations();

struct ActuationSpec {
    std::int64_t clock_hz = 50'000'000;
    int cycles = 10;
};

double actuation_latency_us(std::int64_t clock_hz, int cycles);

struct PipelineReport {
    StageMetrics stages[3];
    double total_time_ms = 0;
    double total_energy_mj = 0;        // active energy + idle energy of inactive domains
    double avg_active_power_mw = 0;    // active energy / total time
    double avg_total_power_mw = 0;     // total energy / total time
    double total_idle_power_mw = 0;    // sum of idle powers
    double actuation_latency_us = 0;
    bool actuation_below_1us = false;
    bool degenerate = false;           // all durations zero, averages reported as 0
    int predicted_class = -1;
    int window_count = 0;
};

PipelineReport total_report(const PowerProfile& profile,
                            const StageDurations& durations,
                            const ActuationSpec& actuation = {});

// Work counters a tiled run leaves behind, plus the acquired event count.
struct RunStats {
    std::uint64_t input_events = 0;
    std::uint64_t stream_spikes = 0;
    std::uint64_t tile_slots = 0;
    std::uint64_t timesteps = 0;
};

// Affine per-stage cost model: duration = fixed + per_unit * units, with
// units = events (acquisition), split/merge spikes (preprocessing) and
// executed tile slots (inference).
struct CostModel {
    struct Affine {
        double fixed_ms = 0;
        double per_unit_ms = 0;
    };
    Affine acquisition;
    Affine preprocessing;
    Affine inference;

    // Coefficients such that `reference_run` reproduces `targets` exactly,
    // keeping the given fixed costs.
    static CostModel calibrate(const RunStats& reference_run,
                               const StageDurations& targets,
                               const StageDurations& fixed = {});
    // Calibrated against a nominal reference workload so the default model
    // lands on the measured table for a typical 300 ms window.
    static CostModel reference();
};

StageDurations measured_durations(const std::optional<RunStats>& run,
                                  const CostModel& model);

// Stable-key "<key>: <value>" lines; see README for the key list.
std::string format_report(const PipelineReport& report);
std::string report_to_json(const PipelineReport& report);
PipelineReport report_from_json(std::string_view json_text);

} // namespace evsnn

#endif
