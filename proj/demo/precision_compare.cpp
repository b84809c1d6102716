// Runs CGLS and the Chebyshev semi-iteration on one deblurring problem in each
// preset format and prints the relative error every few iterations.

#include <cstdio>
#include <vector>

#include "chopsolve/linops.hpp"
#include "chopsolve/problems.hpp"
#include "chopsolve/solvers.hpp"

using namespace chopsolve;

namespace {

void print_curve(const char* label, const SolveResult& r) {
    std::printf("%-22s %-9s best k=%3zu", label, to_string(r.termination), r.best_iter);
    for (const auto& rec : r.history)
        if (rec.k % 10 == 0 && rec.rel_error) std::printf("  %3zu:%.4f", rec.k, *rec.rel_error);
    std::printf("\n");
}

}  // namespace

int main() {
    auto prob = add_noise(gen_deblur(32, 1.0, 4, PhantomKind::Shapes), 0.01, 7);
    const double lambda = 0.05;
    auto base = make_operator(prob.a);
    auto aug = tikhonov_augment(base, lambda);
    const auto rhs = tikhonov_rhs(prob.b, prob.a.cols());
    const auto bounds = estimate_sigma_bounds(*base, lambda, 100, 1);

    for (const auto& fmt : formats::presets()) {
        SolverConfig cfg;
        cfg.fmt = fmt;
        cfg.max_iter = 60;
        cfg.track_error_against = prob.x_true;
        char label[64];
        std::snprintf(label, sizeof label, "cgls %s", fmt.name.c_str());
        print_curve(label, cgls(*base, prob.b, cfg));
        std::snprintf(label, sizeof label, "chebyshev %s", fmt.name.c_str());
        print_curve(label, chebyshev_si(*aug, rhs, bounds.lower, bounds.upper, 1e-6, cfg));
    }
}
