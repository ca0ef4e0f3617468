#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "egokit/geometry.hpp"
#include "helpers.hpp"

using namespace egokit;
using namespace egokit::geometry;
using Eigen::Matrix3d;
using Eigen::Vector2d;
using Eigen::Vector3d;

TEST_CASE("homography_apply basics", "[geometry]") {
    CHECK(homography_apply(Homography::identity(), {3.5, 7.0}).isApprox(Vector2d(3.5, 7.0)));

    Matrix3d scale = Matrix3d::Identity();
    scale(0, 0) = scale(1, 1) = 2.0;
    CHECK(homography_apply(Homography(scale), {1, 1}).isApprox(Vector2d(2, 2)));

    Matrix3d proj = Matrix3d::Identity();
    proj(2, 0) = 0.001;
    const Vector2d mapped = homography_apply(Homography(proj), {100, 0});
    CHECK(mapped.x() == Catch::Approx(100.0 / 1.1).epsilon(1e-12));
    CHECK(mapped.y() == Catch::Approx(0.0).margin(1e-12));

    // the degenerate line of the same map
    CHECK_THROWS_AS(homography_apply(Homography(proj), {-1000.0, 0.0}), DegeneratePoint);
}

TEST_CASE("homography stays normalized and serializes with h33 == 1", "[geometry]") {
    Matrix3d m;
    m << 2, 0.1, 5, -0.2, 1.8, -3, 1e-4, -2e-4, 0.5;
    const Homography h(m);
    CHECK(h.matrix()(2, 2) == 1.0);

    const std::string line = homography_to_line(h);
    std::istringstream iss(line);
    double v[9];
    for (double& x : v) iss >> x;
    CHECK(v[8] == 1.0);
    const Homography back = homography_from_line(line);
    CHECK((back.matrix() - h.matrix()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("homography rejects singular input", "[geometry]") {
    Matrix3d rank1 = Matrix3d::Zero();
    rank1(0, 0) = 1;
    rank1(2, 2) = 1;
    CHECK_THROWS_AS(Homography(rank1), SingularStep);
}

TEST_CASE("so3_exp canonical cases", "[geometry]") {
    CHECK(so3_exp(Vector3d::Zero()).isApprox(Matrix3d::Identity()));

    const Matrix3d half_turn = so3_exp({0, 0, M_PI});
    Matrix3d expected;
    expected << -1, 0, 0, 0, -1, 0, 0, 0, 1;
    CHECK((half_turn - expected).cwiseAbs().maxCoeff() < 1e-12);

    // tiny angle: R == I + skew(phi) to first order
    const Vector3d tiny = Vector3d(1, -2, 0.5).normalized() * 1e-10;
    const Matrix3d r = so3_exp(tiny);
    CHECK((r - (Matrix3d::Identity() + skew(tiny))).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("so3_log canonical cases", "[geometry]") {
    CHECK(so3_log(Matrix3d::Identity()).norm() == 0.0);

    const Vector3d quarter = so3_log(so3_exp({0, 0, M_PI / 2}));
    CHECK((quarter - Vector3d(0, 0, M_PI / 2)).norm() < 1e-12);

    Matrix3d not_rot = Matrix3d::Identity();
    not_rot(0, 0) = 1.5;
    CHECK_THROWS_AS(so3_log(not_rot), NotARotation);
}

TEST_CASE("exp/log round-trip over random rotations", "[geometry]") {
    std::mt19937_64 rng(42);
    for (int i = 0; i < 1000; ++i) {
        const Matrix3d r = testutil::random_rotation(rng);
        const Matrix3d rr = so3_exp(so3_log(r));
        REQUIRE((rr - r).norm() < 1e-9);
    }
    // log then exp on the principal domain
    for (int i = 0; i < 1000; ++i) {
        const Vector3d phi = testutil::random_unit(rng) * testutil::uniform(rng, 0, M_PI);
        const Vector3d back = so3_log(so3_exp(phi));
        REQUIRE((back - phi).norm() < 1e-9);
    }
}

TEST_CASE("so3_log near-pi branch", "[geometry]") {
    std::mt19937_64 rng(43);
    for (int i = 0; i < 200; ++i) {
        const Vector3d axis = testutil::random_unit(rng);
        for (double angle : {M_PI, M_PI - 1e-8, M_PI - 1e-5, M_PI - 5e-4}) {
            const Matrix3d r = so3_exp(axis * angle);
            const Vector3d phi = so3_log(r);
            REQUIRE(phi.norm() <= M_PI + 1e-12);
            REQUIRE((so3_exp(phi) - r).norm() < 1e-9);
        }
    }
}

TEST_CASE("rigid_fit identity and known transform", "[geometry]") {
    const std::vector<Vector3d> src{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0.3, 0.4, 1.2}};
    const Pose id = rigid_fit(src, src);
    CHECK((id.r - Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(id.t.norm() < 1e-12);

    const Matrix3d rot = so3_exp({0, 0, M_PI / 2});
    const Vector3d trans(1, 0, 0);
    std::vector<Vector3d> dst;
    for (const auto& p : src) dst.push_back(rot * p + trans);
    const Pose fit = rigid_fit(src, dst);
    CHECK((fit.r - rot).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((fit.t - trans).norm() < 1e-10);
}

TEST_CASE("rigid_fit degenerate input", "[geometry]") {
    const std::vector<Vector3d> line{{0, 0, 0}, {1, 1, 1}, {2, 2, 2}};
    CHECK_THROWS_AS(rigid_fit(line, line), DegenerateConfiguration);

    const std::vector<Vector3d> a{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    const std::vector<Vector3d> b{{0, 0, 0}, {1, 0, 0}};
    CHECK_THROWS_AS(rigid_fit(a, b), LengthMismatch);

    CHECK_THROWS_AS(rigid_fit({{0, 0, 0}, {1, 0, 0}}, {{0, 0, 0}, {1, 0, 0}}),
                    DegenerateConfiguration);
}

TEST_CASE("rigid_fit is locally optimal on noisy data", "[geometry]") {
    std::mt19937_64 rng(7);
    std::vector<Vector3d> src, dst;
    const Matrix3d rot = testutil::random_rotation(rng);
    const Vector3d trans(0.2, -0.5, 0.9);
    for (int i = 0; i < 12; ++i) {
        src.emplace_back(testutil::uniform(rng, -1, 1), testutil::uniform(rng, -1, 1),
                         testutil::uniform(rng, -1, 1));
        const Vector3d noise(testutil::uniform(rng, -0.01, 0.01),
                             testutil::uniform(rng, -0.01, 0.01),
                             testutil::uniform(rng, -0.01, 0.01));
        dst.push_back(rot * src.back() + trans + noise);
    }
    const Pose fit = rigid_fit(src, dst);
    auto residual = [&](const Pose& p) {
        double ss = 0;
        for (std::size_t i = 0; i < src.size(); ++i) {
            ss += (p.apply(src[i]) - dst[i]).squaredNorm();
        }
        return ss;
    };
    const double best = residual(fit);
    for (int i = 0; i < 100; ++i) {
        Pose perturbed = fit;
        perturbed.r = so3_exp(testutil::random_unit(rng) * testutil::uniform(rng, 1e-4, 0.1)) *
                      fit.r;
        perturbed.t += Vector3d(testutil::uniform(rng, -0.05, 0.05),
                                testutil::uniform(rng, -0.05, 0.05),
                                testutil::uniform(rng, -0.05, 0.05));
        REQUIRE(best <= residual(perturbed) + 1e-12);
    }
}

TEST_CASE("homography apply/inverse round-trip", "[geometry]") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 200; ++i) {
        Matrix3d m = Matrix3d::Identity();
        m(0, 0) = testutil::uniform(rng, 0.8, 1.25);
        m(1, 1) = testutil::uniform(rng, 0.8, 1.25);
        m(0, 1) = testutil::uniform(rng, -0.2, 0.2);
        m(1, 0) = testutil::uniform(rng, -0.2, 0.2);
        m(0, 2) = testutil::uniform(rng, -30, 30);
        m(1, 2) = testutil::uniform(rng, -30, 30);
        m(2, 0) = testutil::uniform(rng, -1e-4, 1e-4);
        m(2, 1) = testutil::uniform(rng, -1e-4, 1e-4);
        const Homography h(m);
        const Vector2d x(testutil::uniform(rng, 0, 640), testutil::uniform(rng, 0, 480));
        const Vector2d back = homography_apply(h.inverse(), homography_apply(h, x));
        REQUIRE((back - x).norm() < 1e-9);
    }
}

TEST_CASE("pose compose/inverse are consistent", "[geometry]") {
    std::mt19937_64 rng(13);
    for (int i = 0; i < 100; ++i) {
        const Pose a(testutil::random_rotation(rng),
                     Vector3d(testutil::uniform(rng, -1, 1), testutil::uniform(rng, -1, 1),
                              testutil::uniform(rng, -1, 1)));
        const Pose b(testutil::random_rotation(rng),
                     Vector3d(testutil::uniform(rng, -1, 1), testutil::uniform(rng, -1, 1),
                              testutil::uniform(rng, -1, 1)));
        const Vector3d p(testutil::uniform(rng, -2, 2), testutil::uniform(rng, -2, 2),
                         testutil::uniform(rng, -2, 2));
        REQUIRE((a.compose(b).apply(p) - a.apply(b.apply(p))).norm() < 1e-12);
        REQUIRE((a.compose(a.inverse()).apply(p) - p).norm() < 1e-12);
    }
}
