// Command-line front end: scenario runs, presets, oracle checks and
// tracking statistics.

#include "evmpc/harness/oracle_check.hpp"
#include "evmpc/harness/presets.hpp"
#include "evmpc/harness/runner.hpp"
#include "evmpc/harness/stats.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>
#include <optional>

namespace {

using namespace evmpc;
using namespace evmpc::harness;

constexpr int kInvariantFailure = 1;
constexpr int kInputError = 2;

// EVMPC_LOG takes a spdlog level name (trace, debug, info, warn, error, off).
void configure_logging()
{
    spdlog::set_pattern("%^%l%$: %v");
    spdlog::set_level(spdlog::level::warn);
    if (const char* lvl = std::getenv("EVMPC_LOG")) {
        spdlog::set_level(spdlog::level::from_str(lvl));
    }
}

int report_run(const RunOutput& out, const std::string& dir)
{
    write_outputs(out, dir);
    spdlog::info("{}: {} slots, {} sessions, {} re-solves, outputs in {}", out.name, out.slots, out.sessions.size(),
                 out.resolves.size(), dir);
    for (const auto& r : out.rejections) {
        spdlog::warn("{}", r);
    }
    for (const auto& s : out.sessions) {
        std::cout << fmt::format("{} {} slots {}-{} energy {:.4f} kWh cost {:.4f} final SoC {:.2f}% (target {:.2f}%)\n",
                                 s.session_id, s.socket, s.start, s.end, s.energy_kwh, s.cost, s.true_final_soc_pct,
                                 s.target_soc_pct);
    }
    std::cout << fmt::format("tracking mean {:.4f} kW max {:.4f} kW mse {:.5f} kW^2 over {} slots\n",
                             out.tracking.mean_abs_dev, out.tracking.max_dev, out.tracking.mse, out.tracking.samples);
    for (const auto& inv : out.invariants) {
        if (inv.ok) {
            spdlog::debug("invariant {} held", inv.name);
        } else {
            spdlog::error("invariant {} failed: {}", inv.name, inv.detail);
        }
    }
    return out.ok() ? 0 : kInvariantFailure;
}

std::vector<double> column_or_last(const std::string& path, const std::string& column, bool explicit_column)
{
    try {
        return read_csv_column(path, column);
    } catch (const CsvError&) {
        if (explicit_column) {
            throw;
        }
    }
    return read_csv_column(path, "");
}

} // namespace

int main(int argc, char** argv)
{
    configure_logging();
    CLI::App app{"Model-predictive EV charging simulator"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    auto* run = app.add_subcommand("run", "Run a scenario file and write its outputs");
    run->add_option("--scenario", scenario_path, "Scenario JSON document")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out_dir, "Output directory")->required();
    run->add_option("--seed", seed, "Override the scenario seed");

    std::string preset_name;
    auto* pre = app.add_subcommand("preset", "Run a built-in field-test scenario");
    pre->add_option("name", preset_name, "Preset name")->required()->check(CLI::IsMember({"test1", "test2"}));
    pre->add_option("--out", out_dir, "Output directory")->required();

    auto* orc = app.add_subcommand("oracle", "Compare branch and bound with pattern enumeration");
    orc->add_option("--scenario", scenario_path, "Scenario JSON document")->required()->check(CLI::ExistingFile);

    std::string commanded_path, applied_path;
    std::string commanded_col = "commanded_kw", applied_col = "applied_kw", active_col = "active_sessions";
    auto* st = app.add_subcommand("stats", "Tracking statistics of two CSV series");
    st->add_option("--commanded", commanded_path, "CSV with the commanded series")->required()->check(CLI::ExistingFile);
    st->add_option("--applied", applied_path, "CSV with the applied series")->required()->check(CLI::ExistingFile);
    auto* ccol = st->add_option("--commanded-column", commanded_col, "Column of the commanded series");
    auto* acol = st->add_option("--applied-column", applied_col, "Column of the applied series");
    st->add_option("--active-column", active_col, "Column in the commanded file marking active slots");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto sc = load_scenario(scenario_path);
            if (seed) {
                sc.seed = *seed;
            }
            return report_run(run_scenario(sc), out_dir);
        }
        if (*pre) {
            return report_run(run_scenario(preset(preset_name)), out_dir);
        }
        if (*orc) {
            const auto rep = oracle_check(load_scenario(scenario_path));
            std::cout << json(rep).dump(2) << "\n";
            return rep.agree() ? 0 : kInvariantFailure;
        }
        if (*st) {
            const auto c = column_or_last(commanded_path, commanded_col, ccol->count() > 0);
            const auto a = column_or_last(applied_path, applied_col, acol->count() > 0);
            std::vector<bool> mask;
            try {
                for (const double v : read_csv_column(commanded_path, active_col)) {
                    mask.push_back(v > 0.0);
                }
            } catch (const CsvError&) {
                spdlog::debug("no {} column; every row counts", active_col);
            }
            const auto s = compute_tracking_stats(c, a, mask);
            std::cout << json{{"samples", s.samples},
                              {"mean_abs_dev", s.mean_abs_dev},
                              {"max_dev", s.max_dev},
                              {"mse", s.mse}}
                             .dump(2)
                      << "\n";
            return 0;
        }
    } catch (const ScenarioInvalid& e) {
        spdlog::error("invalid scenario: {}", e.what());
        return kInputError;
    } catch (const milp::TooLarge& e) {
        spdlog::error("{}", e.what());
        return kInputError;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kInputError;
    }
    return 0;
}
