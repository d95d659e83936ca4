import pytest

from sliceforge.embedder import InfeasibilityReport
from sliceforge.errors import (
    NoViableRelaxation,
    SchemaError,
    StaleProposal,
    UntranslatableIntent,
)
from sliceforge.intent import (
    CatalogueOverlay,
    IntentText,
    RuleBasedAdapter,
    apply_relaxation,
    extract_keywords,
    propose_chain,
    propose_relaxation,
    translate_intent,
)
from sliceforge.profiles import Catalogue, ServiceProfile, SliceRequirement

TELEMEDICINE_INTENT = ("telemedicine service with high quality video calls, "
                       "security, sensitive medical data")


@pytest.fixture
def adapter():
    return RuleBasedAdapter()


class TestExtractKeywords:
    def test_telemedicine_scenario_keywords(self):
        hits = extract_keywords(IntentText(TELEMEDICINE_INTENT))
        got = {(h.keyword, h.category) for h in hits.matched}
        assert {("telemedicine", "service"),
                ("high quality video", "quality"),
                ("security", "security"),
                ("sensitive medical data", "security")} <= got

    def test_empty_intent_rejected_upstream(self):
        with pytest.raises(SchemaError):
            IntentText("   ")

    def test_unmodeled_phrases_surface(self):
        hits = extract_keywords(IntentText("premium gold-plated service"))
        assert "gold-plated" in hits.unmodeled
        assert "premium" in hits.unmodeled

    def test_keyword_soundness(self):
        texts = [TELEMEDICINE_INTENT,
                 "I need basic internet with low latency",
                 "secure video streaming over 5g"]
        for text in texts:
            hits = extract_keywords(IntentText(text))
            for hit in hits.matched:
                assert hit.keyword in text.lower()

    def test_longest_match_wins(self):
        hits = extract_keywords(IntentText("ultra low latency needed"))
        keywords = [h.keyword for h in hits.matched]
        assert "ultra low latency" in keywords
        assert "low latency" not in keywords


class TestTranslateIntent:
    def test_telemedicine_two_slices(self, adapter):
        profile = translate_intent(IntentText(TELEMEDICINE_INTENT), adapter)
        assert profile.service_type == "telemedicine"
        assert len(profile.slice_requirements) == 2
        embb, urllc = profile.slice_requirements
        assert (embb.slice_kind, embb.min_throughput_mbps, embb.max_latency_ms) \
            == ("embb", 100, 100)
        assert (urllc.slice_kind, urllc.min_throughput_mbps, urllc.max_latency_ms) \
            == ("urllc", 10, 5)
        assert all(r.isolation_required and r.encryption_required
                   for r in profile.slice_requirements)
        assert embb.reliability == 0.99
        assert urllc.reliability == 0.999

    def test_basic_internet(self, adapter):
        profile = translate_intent(IntentText("I need basic internet"), adapter)
        (req,) = profile.slice_requirements
        assert (req.slice_kind, req.min_throughput_mbps, req.max_latency_ms) \
            == ("embb", 10, 100)

    def test_untranslatable(self, adapter):
        with pytest.raises(UntranslatableIntent):
            translate_intent(IntentText("hello there"), adapter)

    def test_deterministic(self, adapter):
        a = translate_intent(IntentText(TELEMEDICINE_INTENT), adapter)
        b = translate_intent(IntentText(TELEMEDICINE_INTENT), adapter)
        assert a == b


class TestProposeChain:
    def test_smart_factory_urllc(self, adapter):
        graph = propose_chain("smart-factory", "urllc", adapter)
        assert len(graph.vnfs) == 4
        assert graph.vnfs[0].domain_affinity == "access"
        assert [v.function_kind for v in graph.vnfs] == \
            ["ingress-gw", "firewall", "load-balancer", "app-server"]

    def test_known_type_guard(self, adapter, reference_context):
        with pytest.raises(ValueError):
            propose_chain("telemedicine", "urllc", adapter,
                          catalogue=reference_context.catalogue)

    def test_deterministic(self, adapter):
        a = propose_chain("smart-factory", "urllc", adapter)
        b = propose_chain("smart-factory", "urllc", adapter)
        assert a == b

    def test_overlay_caches_without_touching_base(self, adapter):
        base = Catalogue()
        overlay = CatalogueOverlay(base)
        graph = overlay.resolve("smart-factory", "urllc", adapter)
        assert overlay.has("smart-factory", "urllc")
        assert not base.has("smart-factory", "urllc")
        again = overlay.resolve("smart-factory", "urllc", adapter)
        assert again == graph


def latency_profile(latency=5.0, throughput=10.0):
    return ServiceProfile("p1", "telemedicine", "tenant", (
        SliceRequirement("urllc", latency, throughput, 0.999),))


class TestProposeRelaxation:
    def test_minimal_latency_step(self):
        failure = InfeasibilityReport("latency", "v1", 6.0)

        def oracle(profile):
            return profile.slice_requirements[0].max_latency_ms >= 20

        proposal = propose_relaxation(latency_profile(), failure, oracle)
        assert proposal.attribute == "max_latency_ms"
        assert proposal.current_value == 5
        assert proposal.proposed_value == 20

    def test_already_feasible_guard(self):
        failure = InfeasibilityReport("latency", "v1", 6.0)
        with pytest.raises(ValueError):
            propose_relaxation(latency_profile(), failure, lambda p: True)

    def test_no_viable_relaxation_lists_attempts(self):
        profile = ServiceProfile("p1", "x", "t", (
            SliceRequirement("embb", 100.0, 100.0, 0.99),))
        failure = InfeasibilityReport("bandwidth", "v1", 8.0)
        with pytest.raises(NoViableRelaxation) as err:
            propose_relaxation(profile, failure, lambda p: False)
        assert [a.value for a in err.value.attempts] == [50, 10]

    def test_minimality_exhaustive(self):
        """Every strictly-stronger tier between current and proposed is
        rejected by the oracle (finite ladder, checked directly)."""
        failure = InfeasibilityReport("latency", "v1", 50.0)

        def oracle(profile):
            return profile.slice_requirements[0].max_latency_ms >= 100

        proposal = propose_relaxation(latency_profile(), failure, oracle)
        assert proposal.proposed_value == 100
        for tier in (20,):   # tiers strictly between 5 and 100
            relaxed = latency_profile(latency=tier)
            assert not oracle(relaxed)


class TestApplyRelaxation:
    def test_accept_changes_one_field(self):
        profile = latency_profile()
        failure = InfeasibilityReport("latency", "v1", 6.0)
        proposal = propose_relaxation(
            profile, failure,
            lambda p: p.slice_requirements[0].max_latency_ms >= 20)
        relaxed = apply_relaxation(profile, proposal, accepted=True)
        assert relaxed.slice_requirements[0].max_latency_ms == 20
        unchanged = [f for f in ("slice_kind", "min_throughput_mbps",
                                 "reliability", "isolation_required")
                     if getattr(relaxed.slice_requirements[0], f)
                     == getattr(profile.slice_requirements[0], f)]
        assert len(unchanged) == 4

    def test_reject_returns_identical(self):
        profile = latency_profile()
        failure = InfeasibilityReport("latency", "v1", 6.0)
        proposal = propose_relaxation(
            profile, failure,
            lambda p: p.slice_requirements[0].max_latency_ms >= 20)
        assert apply_relaxation(profile, proposal, accepted=False) == profile

    def test_stale_proposal(self):
        profile = latency_profile()
        failure = InfeasibilityReport("latency", "v1", 6.0)
        proposal = propose_relaxation(
            profile, failure,
            lambda p: p.slice_requirements[0].max_latency_ms >= 20)
        edited = latency_profile(throughput=50.0)
        with pytest.raises(StaleProposal):
            apply_relaxation(edited, proposal, accepted=True)

    def test_monotone_weakening(self):
        """Accepting a proposal never strengthens any attribute."""
        profile = latency_profile()
        failure = InfeasibilityReport("latency", "v1", 6.0)
        proposal = propose_relaxation(
            profile, failure,
            lambda p: p.slice_requirements[0].max_latency_ms >= 20)
        relaxed = apply_relaxation(profile, proposal, accepted=True)
        before, after = profile.slice_requirements[0], relaxed.slice_requirements[0]
        assert after.max_latency_ms >= before.max_latency_ms
        assert after.min_throughput_mbps <= before.min_throughput_mbps
        assert after.reliability <= before.reliability
