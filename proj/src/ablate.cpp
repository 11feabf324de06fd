// SPDX-License-Identifier: Apache-2.0
#include "espo/cli/ablate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace espo::cli {

namespace fs = std::filesystem;

std::vector<double> smooth_curve(const std::vector<double>& raw, int window) {
    const int n = static_cast<int>(raw.size());
    const int half = window / 2;
    std::vector<double> out(raw.size());
    for (int i = 0; i < n; ++i) {
        const int lo = std::max(0, i - half);
        const int hi = std::min(n - 1, i + half);
        double acc = 0.0;
        for (int j = lo; j <= hi; ++j) acc += raw[static_cast<std::size_t>(j)];
        out[static_cast<std::size_t>(i)] = acc / static_cast<double>(hi - lo + 1);
    }
    return out;
}

double terminal_mean(const std::vector<double>& raw, int window) {
    if (raw.empty()) return 0.0;
    const int n = static_cast<int>(raw.size());
    const int lo = std::max(0, n - window);
    double acc = 0.0;
    for (int i = lo; i < n; ++i) acc += raw[static_cast<std::size_t>(i)];
    return acc / static_cast<double>(n - lo);
}

double AblationOutcome::median_terminal(const std::string& arm) const {
    std::vector<double> vals;
    for (const ArmRun& r : runs) {
        if (r.arm == arm && r.ok) vals.push_back(r.terminal_reward);
    }
    if (vals.empty()) return 0.0;
    std::sort(vals.begin(), vals.end());
    const std::size_t n = vals.size();
    return n % 2 ? vals[n / 2] : 0.5 * (vals[n / 2 - 1] + vals[n / 2]);
}

namespace {

std::vector<std::string> arm_labels(const ExperimentSpec& spec, const std::string& axis) {
    std::vector<std::string> out;
    if (axis == "variant") {
        out = spec.axis_variant;
    } else if (axis == "kl") {
        out = spec.axis_kl;
    } else if (axis == "mc") {
        for (int m : spec.axis_mc) out.push_back(std::to_string(m));
    } else if (axis == "mu") {
        for (int mu : spec.axis_mu) out.push_back(std::to_string(mu));
    } else {
        throw ConfigError("ablate: unknown axis \"" + axis +
                          "\" (expected variant|kl|mc|mu)");
    }
    if (out.empty()) throw ConfigError("ablate: axis \"" + axis + "\" has no values");
    return out;
}

ExperimentSpec arm_spec(const ExperimentSpec& spec, const std::string& axis,
                        const std::string& value, std::uint64_t seed) {
    ExperimentSpec s = spec;
    s.train.seed = seed;
    if (axis == "variant") {
        s.train.objective.variant = rl::variant_from_string(value);
    } else if (axis == "kl") {
        s.train.objective.kl = rl::kl_from_string(value);
    } else if (axis == "mc") {
        s.train.mc_pairs = std::stoi(value);
    } else {
        s.train.inner_updates = std::stoi(value);
    }
    return s;
}

std::string sanitize(const std::string& s) {
    std::string out;
    for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) ? c : '-';
    return out;
}

// Minimal SVG line chart: one smoothed median-over-seeds curve per arm.
void write_svg(const std::string& path, const std::string& axis,
               const std::vector<std::string>& arms,
               const std::vector<std::vector<double>>& curves) {
    constexpr int W = 720, H = 420;
    constexpr int ML = 60, MR = 150, MT = 30, MB = 50;
    const double plot_w = W - ML - MR, plot_h = H - MT - MB;

    std::size_t max_len = 1;
    for (const auto& c : curves) max_len = std::max(max_len, c.size());
    static const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                    "#9467bd", "#8c564b"};

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" viewBox=\"0 0 " << W << " " << H << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    // axes
    svg << "<line x1=\"" << ML << "\" y1=\"" << MT << "\" x2=\"" << ML << "\" y2=\""
        << MT + plot_h << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << ML << "\" y1=\"" << MT + plot_h << "\" x2=\"" << ML + plot_w
        << "\" y2=\"" << MT + plot_h << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double y = MT + plot_h - plot_h * i / 5.0;
        svg << "<text x=\"" << ML - 8 << "\" y=\"" << y + 4
            << "\" text-anchor=\"end\" font-size=\"11\">" << i / 5.0 << "</text>\n"
            << "<line x1=\"" << ML - 4 << "\" y1=\"" << y << "\" x2=\"" << ML << "\" y2=\"" << y
            << "\" stroke=\"black\"/>\n";
    }
    svg << "<text x=\"" << ML + plot_w / 2 << "\" y=\"" << H - 12
        << "\" text-anchor=\"middle\" font-size=\"12\">step</text>\n"
        << "<text x=\"16\" y=\"" << MT + plot_h / 2
        << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
        << MT + plot_h / 2 << ")\">mean reward (smoothed)</text>\n"
        << "<text x=\"" << ML + plot_w / 2 << "\" y=\"18\" text-anchor=\"middle\" "
        << "font-size=\"13\">ablation axis: " << axis << "</text>\n";

    for (std::size_t a = 0; a < arms.size(); ++a) {
        const auto& curve = curves[a];
        if (curve.empty()) continue;
        const char* color = kColors[a % 6];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
        for (std::size_t i = 0; i < curve.size(); ++i) {
            const double x =
                ML + (max_len > 1 ? plot_w * static_cast<double>(i) / (max_len - 1) : 0.0);
            const double y = MT + plot_h - plot_h * std::clamp(curve[i], 0.0, 1.0);
            svg << x << "," << y << " ";
        }
        svg << "\"/>\n";
        const double ly = MT + 16.0 * static_cast<double>(a);
        svg << "<rect x=\"" << ML + plot_w + 12 << "\" y=\"" << ly << "\" width=\"12\" "
            << "height=\"4\" fill=\"" << color << "\"/>\n"
            << "<text x=\"" << ML + plot_w + 30 << "\" y=\"" << ly + 6
            << "\" font-size=\"11\">" << arms[a] << "</text>\n";
    }
    svg << "</svg>\n";

    std::ofstream f(path + ".tmp");
    f << svg.str();
    f.close();
    fs::rename(path + ".tmp", path);
}

}  // namespace

AblationOutcome run_ablation(const ExperimentSpec& spec, const std::string& axis,
                             const std::string& out_dir) {
    spec.validate();
    const std::vector<std::string> arms = arm_labels(spec, axis);
    fs::create_directories(out_dir);

    AblationOutcome outcome;
    outcome.axis = axis;
    outcome.csv_path = out_dir + "/ablation-" + axis + ".csv";
    outcome.svg_path = out_dir + "/ablation-" + axis + ".svg";

    // Shared pretrained base per seed, built up front.
    std::vector<std::string> base_paths;
    for (std::uint64_t seed : spec.seeds) {
        base_paths.push_back(make_base_checkpoint(spec, seed, out_dir + "/base"));
    }

    struct Job {
        std::size_t arm_idx;
        std::size_t seed_idx;
    };
    std::vector<Job> jobs;
    for (std::size_t a = 0; a < arms.size(); ++a) {
        for (std::size_t s = 0; s < spec.seeds.size(); ++s) jobs.push_back({a, s});
    }
    outcome.runs.resize(jobs.size());

    std::atomic<std::size_t> next{0};
    std::mutex mu;
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned workers =
        train::deterministic_mode() ? 1u : std::min<unsigned>(hw, static_cast<unsigned>(jobs.size()));

    auto work = [&]() {
        for (;;) {
            const std::size_t j = next.fetch_add(1);
            if (j >= jobs.size()) return;
            const Job job = jobs[j];
            const std::string arm = arms[job.arm_idx];
            const std::uint64_t seed = spec.seeds[job.seed_idx];
            ArmRun run;
            run.arm = arm;
            run.seed = seed;
            run.run_dir = out_dir + "/" + sanitize(axis) + "-" + sanitize(arm) + "/seed-" +
                          std::to_string(seed);
            try {
                const ExperimentSpec s = arm_spec(spec, axis, arm, seed);
                const RunArtifacts art =
                    run_training(s, run.run_dir, base_paths[job.seed_idx]);
                for (const auto& m : art.metrics) run.rewards.push_back(m.mean_reward);
                run.terminal_reward = terminal_mean(run.rewards);
                run.flops_percent = train::flops_percent_of_m1(
                    static_cast<std::uint64_t>(s.train.denoise_steps()),
                    static_cast<std::uint64_t>(s.train.inner_updates),
                    static_cast<std::uint64_t>(s.train.mc_pairs), true);
                run.ok = true;
            } catch (const std::exception& e) {
                run.ok = false;
                run.error = e.what();
            }
            std::lock_guard<std::mutex> lock(mu);
            outcome.runs[j] = std::move(run);
        }
    };

    std::vector<std::thread> pool;
    for (unsigned w = 0; w + 1 < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    // Combined CSV; raw per-step rewards, one row per (step, arm, seed).
    {
        std::ofstream csv(outcome.csv_path + ".tmp");
        csv << "step,value,seed,reward";
        if (axis == "mc") csv << ",flops_percent";
        csv << "\n";
        for (const ArmRun& r : outcome.runs) {
            if (!r.ok) continue;
            for (std::size_t i = 0; i < r.rewards.size(); ++i) {
                csv << i << "," << r.arm << "," << r.seed << "," << r.rewards[i];
                if (axis == "mc") csv << "," << r.flops_percent;
                csv << "\n";
            }
        }
        csv.close();
        fs::rename(outcome.csv_path + ".tmp", outcome.csv_path);
    }

    // Median-over-seeds smoothed curve per arm.
    std::vector<std::vector<double>> curves;
    for (const std::string& arm : arms) {
        std::vector<const ArmRun*> rs;
        for (const ArmRun& r : outcome.runs) {
            if (r.arm == arm && r.ok) rs.push_back(&r);
        }
        std::vector<double> median_curve;
        if (!rs.empty()) {
            std::size_t len = rs[0]->rewards.size();
            for (const ArmRun* r : rs) len = std::min(len, r->rewards.size());
            for (std::size_t i = 0; i < len; ++i) {
                std::vector<double> vals;
                for (const ArmRun* r : rs) vals.push_back(r->rewards[i]);
                std::sort(vals.begin(), vals.end());
                const std::size_t n = vals.size();
                median_curve.push_back(n % 2 ? vals[n / 2]
                                             : 0.5 * (vals[n / 2 - 1] + vals[n / 2]));
            }
            median_curve = smooth_curve(median_curve);
        }
        curves.push_back(std::move(median_curve));
    }
    write_svg(outcome.svg_path, axis, arms, curves);
    return outcome;
}

}  // namespace espo::cli
