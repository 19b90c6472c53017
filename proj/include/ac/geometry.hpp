#ifndef AC_GEOMETRY_HPP
#define AC_GEOMETRY_HPP

#include <array>
#include <cmath>
#include <stdexcept>

// Small fixed-size 2D linear algebra used throughout the library.

namespace ac {

struct Vec2 {
    double x = 0.0, y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
    Vec2& operator*=(double s) { x *= s; y *= s; return *this; }
};

inline Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
inline Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
inline Vec2 operator*(double s, Vec2 a) { return a *= s; }
inline Vec2 operator*(Vec2 a, double s) { return a *= s; }
inline Vec2 operator-(const Vec2& a) { return {-a.x, -a.y}; }

inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double norm2(const Vec2& a) { return dot(a, a); }
inline double norm(const Vec2& a) { return std::sqrt(norm2(a)); }
inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }

// Row-major 2x2 matrix: m[r][c].
struct Mat2 {
    std::array<std::array<double, 2>, 2> m{{{0, 0}, {0, 0}}};

    Mat2() = default;
    Mat2(double a00, double a01, double a10, double a11) : m{{{a00, a01}, {a10, a11}}} {}

    static Mat2 identity() { return {1, 0, 0, 1}; }
    static Mat2 scale(double s) { return {s, 0, 0, s}; }

    double& operator()(int r, int c) { return m[r][c]; }
    double operator()(int r, int c) const { return m[r][c]; }

    Mat2& operator+=(const Mat2& o) {
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c) m[r][c] += o.m[r][c];
        return *this;
    }
    Mat2& operator-=(const Mat2& o) {
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c) m[r][c] -= o.m[r][c];
        return *this;
    }
    Mat2& operator*=(double s) {
        for (auto& row : m)
            for (auto& v : row) v *= s;
        return *this;
    }
};

inline Mat2 operator+(Mat2 a, const Mat2& b) { return a += b; }
inline Mat2 operator-(Mat2 a, const Mat2& b) { return a -= b; }
inline Mat2 operator*(double s, Mat2 a) { return a *= s; }
inline Mat2 operator*(Mat2 a, double s) { return a *= s; }

inline Vec2 operator*(const Mat2& A, const Vec2& v) {
    return {A(0, 0) * v.x + A(0, 1) * v.y, A(1, 0) * v.x + A(1, 1) * v.y};
}

inline Mat2 operator*(const Mat2& A, const Mat2& B) {
    Mat2 C;
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) C(r, c) = A(r, 0) * B(0, c) + A(r, 1) * B(1, c);
    return C;
}

inline double det(const Mat2& A) { return A(0, 0) * A(1, 1) - A(0, 1) * A(1, 0); }

inline Mat2 inverse(const Mat2& A) {
    const double d = det(A);
    if (d == 0.0) throw std::invalid_argument("Mat2::inverse: singular matrix");
    return {A(1, 1) / d, -A(0, 1) / d, -A(1, 0) / d, A(0, 0) / d};
}

inline Mat2 transpose(const Mat2& A) { return {A(0, 0), A(1, 0), A(0, 1), A(1, 1)}; }

// a (x) b, the rank-one matrix a b^T
inline Mat2 outer(const Vec2& a, const Vec2& b) {
    return {a.x * b.x, a.x * b.y, a.y * b.x, a.y * b.y};
}

inline double frobenius(const Mat2& A) {
    return std::sqrt(A(0, 0) * A(0, 0) + A(0, 1) * A(0, 1) + A(1, 0) * A(1, 0) +
                     A(1, 1) * A(1, 1));
}

inline double ddot(const Mat2& A, const Mat2& B) {
    return A(0, 0) * B(0, 0) + A(0, 1) * B(0, 1) + A(1, 0) * B(1, 0) + A(1, 1) * B(1, 1);
}

}  // namespace ac

#endif
