// Vanilla vs clipped SsGD on phase retrieval under Pareto noise, using the
// library directly (no config file).
#include <wcopt/metrics.hpp>
#include <wcopt/optim.hpp>

#include <cstdio>

int main() {
    using namespace wcopt;
    const ProblemInstance p = make_preset_problem("phase_d10_m30");
    const NoiseModel noise = make_pareto_noise(/*sigma=*/1.0, /*p=*/1.5, /*alpha=*/1.8);
    const double G = p.lipschitz_g;
    const long T = 2000;

    MoreauConfig mc;
    mc.rho_bar = 2.0 * p.rho;

    for (std::uint64_t run = 0; run < 3; ++run) {
        RngStream rng_a(7, run), rng_b(7, run);
        const Trajectory plain = run_ssgd(p, noise, InverseSqrtStep{1.0 / G}, T, rng_a);
        const Trajectory clipped =
            run_clipped_ssgd(p, noise, ClipCoupledAnytimeStep{1.0, G}, AnytimeClip{1.0, 1.5, G}, 1, T, rng_b);
        const RunReport a = trajectory_metrics(plain, p, mc);
        const RunReport b = trajectory_metrics(clipped, p, mc);
        long active = 0;
        for (const auto& s : clipped.steps) active += s.clip_active;
        std::printf("run %llu  ssgd %.3e  clipped %.3e  (clip active on %ld of %ld steps)\n",
                    static_cast<unsigned long long>(run), a.weighted_avg, b.weighted_avg, active, T);
    }
}
