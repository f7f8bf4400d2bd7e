#include "lens/analysis.hpp"
#include "lens/error.hpp"

#include "../support/testkit.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace lens;
using namespace lens::analysis;

TEST(VaeLoss, HandComputedSmallBatch) {
    VaeBatch b;
    b.x = {{1.0, 2.0}};
    b.x_hat = {{0.0, 2.0}};
    b.mu = {{1.0}};
    b.logvar = {{0.0}};
    b.beta = 0.5;
    const VaeLoss l = vae_loss(b);
    EXPECT_DOUBLE_EQ(l.recon, 0.5);
    // -1/2 (1 + 0 - 1 - 1) = 1/2
    EXPECT_DOUBLE_EQ(l.kl, 0.5);
    EXPECT_DOUBLE_EQ(l.total, 0.75);
}

TEST(VaeLoss, KlIsBatchMeanAndNonNegative) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0, 1);
    VaeBatch b;
    for (int i = 0; i < 4; ++i) {
        b.x.push_back({g(rng)});
        b.x_hat.push_back({g(rng)});
        std::vector<double> mu(latent_dim), lv(latent_dim);
        for (auto& v : mu) v = g(rng);
        for (auto& v : lv) v = g(rng);
        b.mu.push_back(mu);
        b.logvar.push_back(lv);
    }
    const VaeLoss all = vae_loss(b);
    EXPECT_GE(all.kl, 0.0);
    double sum = 0;
    for (int i = 0; i < 4; ++i) {
        VaeBatch one;
        one.x = {b.x[i]};
        one.x_hat = {b.x_hat[i]};
        one.mu = {b.mu[i]};
        one.logvar = {b.logvar[i]};
        sum += vae_loss(one).kl;
    }
    EXPECT_NEAR(all.kl, sum / 4, 1e-12 * std::abs(sum));
}

TEST(VaeLoss, TinyLogVarianceKeepsPrecision) {
    VaeBatch b;
    b.x = {{0.0}};
    b.x_hat = {{0.0}};
    b.mu = {{0.0}};
    b.logvar = {{1e-9}};
    // exp(lv) - 1 - lv = lv^2/2 + ..., so kl = lv^2/4.
    EXPECT_NEAR(vae_loss(b).kl, 0.25e-18, 1e-27);
}

TEST(VaeLoss, ShapeErrors) {
    VaeBatch b;
    EXPECT_THROW(vae_loss(b), Error);
    b.x = {{1.0}};
    b.x_hat = {{1.0, 2.0}};
    b.mu = {{0.0}};
    b.logvar = {{0.0}};
    EXPECT_THROW(vae_loss(b), Error);
    b.x_hat = {{1.0}};
    b.beta = -1;
    EXPECT_THROW(vae_loss(b), Error);
    b.beta = 0;
    b.logvar = {{0.0, 1.0}};
    EXPECT_THROW(vae_loss(b), Error);
}

TEST(Knn, OrderingTiesAndErrors) {
    EmbeddingTable t;
    t.dim = 2;
    t.ids = {"q", "b", "a", "c", "far"};
    t.values = {0, 0, 1, 0, 0, 1, 3, 4, 10, 10};
    const auto nn = knn(t, "q", 3);
    ASSERT_EQ(nn.size(), 3u);
    EXPECT_EQ(nn[0].id, "a");
    EXPECT_EQ(nn[1].id, "b");
    EXPECT_EQ(nn[2].id, "c");
    EXPECT_DOUBLE_EQ(nn[2].distance, 5.0);
    try {
        knn(t, "zzz", 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::not_found);
    }
    EXPECT_THROW(knn(t, "q", 0), Error);
    EXPECT_THROW(knn(t, "q", 5), Error);
    EXPECT_EQ(knn(t, "q", 4).back().id, "far");
}

TEST(Embeddings, CsvRoundTripIsExact) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g(0, 1);
    EmbeddingTable t;
    t.dim = 5;
    for (int i = 0; i < 20; ++i) {
        t.ids.push_back("page0001_det" + std::to_string(i));
        for (int j = 0; j < 5; ++j) t.values.push_back(g(rng) * 1e3);
    }
    const EmbeddingTable back = parse_embeddings(to_csv(t));
    EXPECT_EQ(back.ids, t.ids);
    EXPECT_EQ(back.values, t.values);
    EXPECT_EQ(back.dim, 5u);
}

TEST(Embeddings, ParseErrors) {
    auto msg = [](const std::string& text) {
        try {
            parse_embeddings(text);
        } catch (const Error& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    EXPECT_NE(msg("id,v0,v1\na,1,2\nb,1\n").find("line 3"), std::string::npos);
    EXPECT_NE(msg("id,v0\na,1\na,2\n"), "no error");
    EXPECT_NE(msg("id,v0\na,nan\n"), "no error");
    EXPECT_NE(msg("id,v0\na,x\n"), "no error");
    EXPECT_NE(msg("name,v0\na,1\n"), "no error");
}
