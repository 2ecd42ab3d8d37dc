#pragma once

#include <string>
#include <vector>

#include "nmrsim/core.hpp"
#include "nmrsim/tensor.hpp"

namespace nmr {

struct Crystallite {
    Euler angles;  // crystal -> rotor
    double weight = 0.0;
};

struct CrystalliteSet {
    std::vector<Crystallite> items;
    std::string scheme;

    std::size_t size() const { return items.size(); }
    // Weights sum to one and beta lies in [0, pi].
    void validate() const;
};

// Zaremba-Conroy-Wolfsberg pairs over the full sphere: N = F(m + 2) points.
CrystalliteSet zcw(int m, int n_gamma = 1);

// alpha uniform on [0, 2 pi), beta at cell centres weighted by sin(beta), gamma uniform.
// A single beta point sits at beta = 0 with unit weight.
CrystalliteSet grid(int n_alpha, int n_beta, int n_gamma);

// One crystallite per line: alpha_deg beta_deg gamma_deg weight; '#' starts a comment.
// With n_gamma > 0 the file gamma is replaced by n_gamma uniform angles.
CrystalliteSet load_crystallite_file(const std::string& path, int n_gamma = 0);
CrystalliteSet parse_crystallites(const std::string& text, int n_gamma = 0, const std::string& scheme = "file");
std::string format_crystallites(const CrystalliteSet& set);

// Replace every gamma by n uniform values (weights split evenly).
CrystalliteSet with_gamma(const CrystalliteSet& pairs, int n_gamma);

double powder_average(const std::vector<double>& values, const CrystalliteSet& set);
std::vector<double> powder_average(const std::vector<std::vector<double>>& curves, const CrystalliteSet& set);

// Second Legendre moment <P2(cos beta)> of the orientation set (zero for uniform sphere coverage).
double p2_moment(const CrystalliteSet& set);

// Recoupled zero-quantum dipolar strength for a two-pulse rotor-synchronized unit with
// ideal pi pulses, averaged over the powder. relative_shift is the change in the pulse
// separation (s): 0 is standard RFDR, +-tau_r puts both pulses together or two periods apart.
double rfdr_recoupling_strength(double shift_difference_hz, double spin_rate, double dipolar_b,
                                double relative_shift, const CrystalliteSet& set, const Euler& dipole_pas = {});

}  // namespace nmr
