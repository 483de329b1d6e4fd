"""
Tests del almacén de items: asignación única, orden de commits y readiness.
"""

import pytest

from app.errors import (
    AccessViolation, ConflictingRecommit, NonPositiveLength, NotResolved,
    OutOfOrderCommit,
)
from app.items import (
    ItemKind, ItemSpec, ItemStore, Mode, RecordState, RegionRef, StateVar,
    regions_overlap, same_bits,
)


@pytest.fixture
def store():
    return ItemStore()


class TestRegions:
    """Tests de regiones"""

    def test_overlap(self):
        """Test solapamiento de rangos del mismo item"""
        assert regions_overlap(RegionRef(1, 1, 4), RegionRef(1, 4, 6))
        assert not regions_overlap(RegionRef(1, 1, 3), RegionRef(1, 4, 6))
        assert not regions_overlap(RegionRef(1, 1, 3), RegionRef(2, 1, 3))

    def test_invalid_region(self):
        """Test región vacía o con base cero"""
        with pytest.raises(ValueError):
            RegionRef(1, 0, 2)
        with pytest.raises(ValueError):
            RegionRef(1, 3, 2)

    def test_length(self):
        assert RegionRef(1, 2, 7).length == 6


class TestSameBits:
    """Tests de igualdad exacta"""

    def test_reals_by_bits(self):
        assert same_bits(0.1 + 0.2, 0.1 + 0.2)
        assert not same_bits(0.1 + 0.2, 0.3)
        assert not same_bits(0.0, -0.0)
        assert same_bits(float("nan"), float("nan"))

    def test_int_is_not_real(self):
        """Test 1 y 1.0 no son el mismo valor"""
        assert not same_bits(1, 1.0)
        assert same_bits(7, 7)

    def test_records(self):
        s1 = RecordState("Stack", (StateVar("p", "int", (2,)),))
        s2 = RecordState("Stack", (StateVar("p", "int", (2,)),))
        s3 = RecordState("Stack", (StateVar("p", "int", (3,)),))
        assert same_bits(s1, s2)
        assert not same_bits(s1, s3)
        assert s1.lookup("p").values == (2,)


class TestItemStore:
    """Tests del almacén"""

    def test_creation(self, store):
        """Test items nuevos sin resolver"""
        a = store.new_array("real", 8)
        k = store.new_scalar("int")
        assert store.item(a).kind is ItemKind.ARRAY
        assert store.item(a).length == 8
        assert not store.item(k).is_resolved()
        assert a != k

    def test_non_positive_length(self, store):
        with pytest.raises(NonPositiveLength):
            store.new_array("real", 0)

    def test_allocated_id_registered_later(self, store):
        """Test id reservado y registrado después"""
        item_id = store.allocate_id()
        assert item_id not in store.items
        store.create(ItemSpec(item_id, ItemKind.SCALAR, "int"))
        assert store.item(item_id).type == "int"

    def test_unknown_item(self, store):
        with pytest.raises(AccessViolation):
            store.item(99)

    def test_read_unresolved(self, store):
        k = store.new_scalar("int")
        with pytest.raises(NotResolved):
            store.read(k)
        with pytest.raises(NotResolved):
            store.read_all(k)

    def test_read_out_of_range(self, store):
        a = store.new_array("int", 3)
        store.initialize(a, {1: 1, 2: 2, 3: 3})
        assert store.read_all(a) == [1, 2, 3]
        with pytest.raises(AccessViolation):
            store.read(a, 4)

    def test_register_out_of_range(self, store):
        a = store.new_array("int", 3)
        with pytest.raises(AccessViolation):
            store.register_accesses(1, [(RegionRef(a, 2, 4), Mode.WRITE, (1,), False)])


class TestSingleAssignment:
    """Tests de asignación única"""

    def test_resolve_and_read(self, store):
        k = store.new_scalar("int")
        store.register_accesses(1, [(RegionRef(k, 1, 1), Mode.WRITE, (1,), False)])
        store.resolve(1, k, {1: 55})
        assert store.read(k) == 55

    def test_identical_recommit_is_noop(self, store):
        """Test replay con los mismos bits"""
        k = store.new_scalar("real")
        store.register_accesses(1, [(RegionRef(k, 1, 1), Mode.WRITE, (1,), False)])
        store.resolve(1, k, {1: 0.5})
        store.complete(1)
        store.resolve(1, k, {1: 0.5})
        assert store.read(k) == 0.5

    def test_conflicting_recommit(self, store):
        k = store.new_scalar("real")
        store.register_accesses(1, [(RegionRef(k, 1, 1), Mode.WRITE, (1,), False)])
        store.resolve(1, k, {1: 0.5})
        with pytest.raises(ConflictingRecommit):
            store.resolve(1, k, {1: 0.25})

    def test_write_without_access(self, store):
        k = store.new_scalar("int")
        store.register_accesses(1, [(RegionRef(k, 1, 1), Mode.READ, (1,), False)])
        with pytest.raises(AccessViolation):
            store.resolve(1, k, {1: 3})
        with pytest.raises(AccessViolation):
            store.resolve(2, k, {1: 3})

    def test_out_of_order_commit(self, store):
        """Test escritura con un acceso anterior pendiente"""
        a = store.new_array("int", 4)
        store.register_accesses(1, [(RegionRef(a, 1, 4), Mode.WRITE, (1,), False)])
        store.register_accesses(2, [(RegionRef(a, 3, 3), Mode.READWRITE, (2,), False)])
        with pytest.raises(OutOfOrderCommit):
            store.resolve(2, a, {3: 9})


class TestReadiness:
    """Tests de readiness según el libro"""

    def test_no_accesses_is_ready(self, store):
        assert store.is_ready(5)

    def test_reader_waits_for_writer(self, store):
        """Test lector posterior espera al escritor"""
        k = store.new_scalar("int")
        store.register_accesses(1, [(RegionRef(k, 1, 1), Mode.WRITE, (1,), False)])
        store.register_accesses(2, [(RegionRef(k, 1, 1), Mode.READ, (2,), False)])
        assert store.is_ready(1)
        assert not store.is_ready(2)
        store.resolve(1, k, {1: 4})
        store.complete(1)
        assert store.is_ready(2)

    def test_disjoint_regions_independent(self, store):
        """Test mitades disjuntas del mismo arreglo"""
        a = store.new_array("real", 8)
        store.register_accesses(1, [(RegionRef(a, 2, 4), Mode.READWRITE, (1, 1), True)])
        store.register_accesses(2, [(RegionRef(a, 5, 7), Mode.READWRITE, (1, 2), True)])
        assert store.is_ready(1)
        assert store.is_ready(2)

    def test_ledger_ordered_by_seq(self, store):
        """Test registro fuera de orden: manda el seq"""
        k = store.new_scalar("int")
        store.register_accesses(2, [(RegionRef(k, 1, 1), Mode.READWRITE, (1, 2), True)])
        store.register_accesses(1, [(RegionRef(k, 1, 1), Mode.WRITE, (1, 1), False)])
        assert [a.task for a in store.pending[k]] == [1, 2]
        assert store.is_ready(1)
        assert not store.is_ready(2)

    def test_concurrent_readers(self, store):
        k = store.new_scalar("int")
        store.initialize(k, {1: 3})
        store.register_accesses(1, [(RegionRef(k, 1, 1), Mode.READ, (1,), False)])
        store.register_accesses(2, [(RegionRef(k, 1, 1), Mode.READ, (2,), False)])
        assert store.is_ready(1) and store.is_ready(2)

    def test_delegated_read_does_not_wait_for_value(self, store):
        """Test acceso del: sólo orden, no valor"""
        k = store.new_scalar("int")
        store.register_accesses(1, [(RegionRef(k, 1, 1), Mode.READ, (1,), True)])
        assert store.is_ready(1)

    def test_waiting_on(self, store):
        k = store.new_scalar("int")
        store.register_accesses(3, [(RegionRef(k, 1, 1), Mode.READ, (1,), False)])
        assert store.waiting_on([k]) == [3]
        store.complete(3)
        assert store.waiting_on([k]) == []


if __name__ == "__main__":
    pytest.main([__file__, "-v", "--tb=short"])
