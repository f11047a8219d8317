#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rcm/error.hpp"
#include "rcm/random.hpp"

namespace rcm {

using Point = Eigen::VectorXd;

inline constexpr double kOrthogonalityTolerance = 1e-12;
inline constexpr double kFixedPointTolerance = 1e-9;

/// Affine map x -> linear * x + shift.
struct AffineMap {
    Eigen::MatrixXd linear;
    Eigen::VectorXd shift;

    Point operator()(const Point& x) const { return linear * x + shift; }

    /// (*this) o inner
    AffineMap compose(const AffineMap& inner) const {
        return {linear * inner.linear, linear * inner.shift + shift};
    }

    static AffineMap identity(int dim) {
        return {Eigen::MatrixXd::Identity(dim, dim), Eigen::VectorXd::Zero(dim)};
    }
};

/// One similitude psi_i(x) = beta^{-1} U_i x + gamma_i.
struct Similitude {
    Eigen::MatrixXd rotation;  // U_i, orthogonal
    Eigen::VectorXd shift;     // gamma_i
};

/// Iterated function system of a nested fractal. The first map must be
/// x -> x / beta so that the origin is a fixed point.
struct IFSSpec {
    int dim = 0;
    double beta = 0.0;
    std::vector<Similitude> maps;
    std::string preset_name;

    std::size_t size() const noexcept { return maps.size(); }

    AffineMap affine(std::size_t i) const {
        return {maps[i].rotation / beta, maps[i].shift};
    }

    Point apply(std::size_t i, const Point& x) const {
        return maps[i].rotation * x / beta + maps[i].shift;
    }

    void validate() const {
        if (dim < 1) throw InvalidFractalError("ifs_fractal", "ambient dimension must be positive");
        if (!(beta > 1.0)) throw InvalidFractalError("ifs_fractal", "contraction ratio beta must exceed 1");
        if (maps.size() < 2) throw InvalidFractalError("ifs_fractal", "need at least two maps, got " + std::to_string(maps.size()));
        if (maps.size() > 255) throw InvalidFractalError("ifs_fractal", "at most 255 maps are supported");
        const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(dim, dim);
        for (std::size_t i = 0; i < maps.size(); ++i) {
            const auto& m = maps[i];
            if (m.rotation.rows() != dim || m.rotation.cols() != dim || m.shift.size() != dim)
                throw InvalidFractalError("ifs_fractal", "map " + std::to_string(i + 1) + " has wrong dimensions");
            const double defect = (m.rotation.transpose() * m.rotation - eye).cwiseAbs().maxCoeff();
            if (defect > kOrthogonalityTolerance)
                throw InvalidFractalError("ifs_fractal", "U_" + std::to_string(i + 1) + " is not orthogonal (defect " + std::to_string(defect) + ")");
        }
        if ((maps[0].rotation - eye).cwiseAbs().maxCoeff() > kOrthogonalityTolerance ||
            maps[0].shift.cwiseAbs().maxCoeff() > kOrthogonalityTolerance)
            throw InvalidFractalError("ifs_fractal", "the first map must be x -> x / beta");
    }
};

/// Finite address (i_1, ..., i_n) of an n-cell; letters are stored 0-based and
/// printed 1-based joined by '.', with "-" for the empty word.
struct CellWord {
    std::vector<std::uint8_t> letters;

    std::size_t level() const noexcept { return letters.size(); }

    CellWord concat(const CellWord& tail) const {
        CellWord out = *this;
        out.letters.insert(out.letters.end(), tail.letters.begin(), tail.letters.end());
        return out;
    }

    CellWord prefix(std::size_t n) const {
        return CellWord{{letters.begin(), letters.begin() + static_cast<std::ptrdiff_t>(n)}};
    }

    /// Position among the N^n words of this length in lexicographic order.
    std::size_t index(std::size_t n_maps) const {
        std::size_t idx = 0;
        for (auto l : letters) idx = idx * n_maps + l;
        return idx;
    }

    static CellWord from_index(std::size_t idx, std::size_t level, std::size_t n_maps) {
        CellWord w;
        w.letters.resize(level);
        for (std::size_t k = level; k-- > 0;) {
            w.letters[k] = static_cast<std::uint8_t>(idx % n_maps);
            idx /= n_maps;
        }
        return w;
    }

    AffineMap map(const IFSSpec& spec) const {
        AffineMap m = AffineMap::identity(spec.dim);
        for (auto l : letters) m = m.compose(spec.affine(l));
        return m;
    }

    Point apply(const IFSSpec& spec, const Point& x) const {
        Point y = x;
        for (auto it = letters.rbegin(); it != letters.rend(); ++it) y = spec.apply(*it, y);
        return y;
    }

    std::string to_string() const {
        if (letters.empty()) return "-";
        std::string s;
        for (std::size_t k = 0; k < letters.size(); ++k) {
            if (k) s += '.';
            s += std::to_string(static_cast<int>(letters[k]) + 1);
        }
        return s;
    }

    static CellWord parse(const std::string& text) {
        CellWord w;
        if (text == "-" || text.empty()) return w;
        std::stringstream ss(text);
        std::string tok;
        while (std::getline(ss, tok, '.')) {
            int v = std::stoi(tok);
            if (v < 1 || v > 255) throw ArgumentError("ifs_fractal", "bad letter in cell word '" + text + "'");
            w.letters.push_back(static_cast<std::uint8_t>(v - 1));
        }
        return w;
    }

    friend bool operator==(const CellWord&, const CellWord&) = default;
    friend auto operator<=>(const CellWord&, const CellWord&) = default;
};

namespace presets {

inline IFSSpec sierpinski_gasket() {
    IFSSpec s;
    s.dim = 2;
    s.beta = 2.0;
    s.preset_name = "sierpinski-gasket";
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);
    s.maps.push_back({eye, Eigen::Vector2d(0.0, 0.0)});
    s.maps.push_back({eye, Eigen::Vector2d(0.5, 0.0)});
    s.maps.push_back({eye, Eigen::Vector2d(0.25, std::sqrt(3.0) / 4.0)});
    return s;
}

/// Vicsek set: four corner squares plus the central one, ratio 1/3.
inline IFSSpec vicsek_2d() {
    IFSSpec s;
    s.dim = 2;
    s.beta = 3.0;
    s.preset_name = "vicsek-2d";
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);
    const double t = 2.0 / 3.0;
    s.maps.push_back({eye, Eigen::Vector2d(0.0, 0.0)});
    s.maps.push_back({eye, Eigen::Vector2d(t, 0.0)});
    s.maps.push_back({eye, Eigen::Vector2d(0.0, t)});
    s.maps.push_back({eye, Eigen::Vector2d(t, t)});
    s.maps.push_back({eye, Eigen::Vector2d(1.0 / 3.0, 1.0 / 3.0)});
    return s;
}

inline std::optional<IFSSpec> by_name(const std::string& name) {
    if (name == "sierpinski-gasket") return sierpinski_gasket();
    if (name == "vicsek-2d") return vicsek_2d();
    return std::nullopt;
}

}  // namespace presets

inline std::vector<Point> fixed_points(const IFSSpec& spec) {
    std::vector<Point> fix;
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(spec.dim, spec.dim);
    for (std::size_t i = 0; i < spec.size(); ++i) {
        const Eigen::MatrixXd a = eye - spec.maps[i].rotation / spec.beta;
        Point x = a.colPivHouseholderQr().solve(spec.maps[i].shift);
        bool seen = false;
        for (const auto& y : fix) seen = seen || (x - y).cwiseAbs().maxCoeff() <= kFixedPointTolerance;
        if (!seen) fix.push_back(std::move(x));
    }
    return fix;
}

/// V_0: fixed points x for which psi_i(x) = psi_j(y) with i != j and y
/// another fixed point. The origin is placed first; the rest follow the
/// order of the maps.
inline std::vector<Point> essential_fixed_points(const IFSSpec& spec) {
    spec.validate();
    const auto fix = fixed_points(spec);
    std::vector<char> essential(fix.size(), 0);
    for (std::size_t a = 0; a < fix.size(); ++a) {
        for (std::size_t i = 0; i < spec.size() && !essential[a]; ++i) {
            const Point px = spec.apply(i, fix[a]);
            for (std::size_t j = 0; j < spec.size() && !essential[a]; ++j) {
                if (i == j) continue;
                for (const auto& y : fix) {
                    if ((px - spec.apply(j, y)).cwiseAbs().maxCoeff() <= kFixedPointTolerance) {
                        essential[a] = 1;
                        break;
                    }
                }
            }
        }
    }
    std::vector<Point> v0;
    for (std::size_t a = 0; a < fix.size(); ++a)
        if (essential[a] && fix[a].cwiseAbs().maxCoeff() <= kFixedPointTolerance) v0.push_back(Point::Zero(spec.dim));
    if (v0.empty())
        throw InvalidFractalError("ifs_fractal", "the origin is not an essential fixed point");
    for (std::size_t a = 0; a < fix.size(); ++a)
        if (essential[a] && fix[a].cwiseAbs().maxCoeff() > kFixedPointTolerance) v0.push_back(fix[a]);
    if (v0.size() < 2)
        throw InvalidFractalError("ifs_fractal", "fewer than two essential fixed points");
    return v0;
}

inline CellWord random_word(std::size_t n_maps, std::size_t depth, Engine& rng) {
    CellWord w;
    w.letters.resize(depth);
    for (auto& l : w.letters) l = static_cast<std::uint8_t>(rng() % n_maps);
    return w;
}

/// psi_w(0) for a word w of i.i.d. uniform letters: a draw from the
/// self-similar measure up to resolution beta^{-depth}.
inline Point sample_self_similar(const IFSSpec& spec, std::size_t depth, Engine& rng) {
    return random_word(spec.size(), depth, rng).apply(spec, Point::Zero(spec.dim));
}

}  // namespace rcm
