#pragma once

#include <cmath>
#include <memory>

#include "kacrice/structure_function.hpp"

// D(r) = a r + b r^2. Not a structure function for b < 0 at large r, which is the point:
// it exercises the degenerate branches.
class QuadraticModel : public kacrice::ClosedFormModel {
public:
    QuadraticModel(double a, double b) : c_{0.0, a, b} {}
    double remainder(double r, int order, int terms) const override {
        double s = 0.0;
        for (int k = std::max(terms, 0); k + order <= 2; ++k) {
            double coef = c_[k + order];
            for (int m = k + 1; m <= k + order; ++m) coef *= m;
            s += coef * std::pow(r, k);
        }
        return s;
    }
    int max_dimension() const override { return 1; }
    nlohmann::json descriptor() const override { return {{"formula", "quadratic"}, {"a", c_[1]}, {"b", c_[2]}}; }

private:
    double c_[3];
};

inline kacrice::StructureFunction quadratic_field(double a, double b) {
    return kacrice::StructureFunction::closed_form(std::make_shared<QuadraticModel>(a, b), "quadratic");
}
