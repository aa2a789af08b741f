import pytest

from apifuzz.api_model import (
    Constant,
    Constraints,
    ResponseExtraction,
    ResponseSpec,
    EndpointSpec,
    FieldSpec,
    UnsupportedExpression,
    ValueSchema,
    build_model,
    filter_endpoints,
    merge_all_of,
    parse_binding,
    plural,
    singular,
)
from apifuzz.errors import ConfigurationError
from apifuzz.schema_loader import InMemoryFetcher, load_schema
from conftest import minimal_document, model_from_document


def _build(document, location="http://s.test/api.yaml"):
    graph, _ = load_schema(location, fetcher=InMemoryFetcher({location: document}))
    return build_model(graph)


class TestLinksModel:
    def test_endpoints(self, links_model):
        """
        Check the endpoints read from the links schema.
        """
        assert [e.key for e in links_model.endpoints] == [
            "POST:/api/links/create",
            "GET:/api/links/users/{name}/{code}",
        ]
        get_user = links_model.by_operation_id("getUser")
        assert get_user is links_model.by_key("GET:/api/links/users/{name}/{code}")
        assert get_user.tags == frozenset({"bb-links-application"})

    def test_parameter_order(self, links_model):
        """
        Check that path parameters come first, in template order, and that a query
        parameter may share a path parameter's name.
        """
        get_user = links_model.by_operation_id("getUser")
        assert [p.designator for p in get_user.params] == [
            "path.name",
            "path.code",
            "query.name",
        ]
        assert get_user.param("name").location == "path"
        assert get_user.param("query.name").required is False
        assert get_user.param("code").schema.type == "integer"

    def test_link_bindings(self, links_model):
        """
        Check that the declared link is read with its three bindings.
        """
        create = links_model.by_operation_id("postCreate")
        (link,) = create.response(200).links
        assert link.name == "LinkToGetUser"
        assert link.target_operation_id == "getUser"
        assert dict(link.bindings) == {
            "path.name": ResponseExtraction(("data", "id"), "$response.body#/data/id"),
            "query.name": Constant("BAR"),
            "code": ResponseExtraction(("data", "code"), "$response.body#/data/code"),
        }

    def test_faulty_links_dropped(self):
        """
        Check that links placed next to status codes do not reach the model.
        """
        from conftest import fixture_model

        model = fixture_model("links-faulty")
        create = model.by_operation_id("postCreate")
        assert [r.status for r in create.responses] == ["200"]
        assert create.response(200).links == ()

    def test_response_schema(self, links_model):
        """
        Check that response schemas are inlined from components.
        """
        create = links_model.by_operation_id("postCreate")
        schema = create.response(200).schema
        assert schema.name == "BBLinksDto"
        assert schema.field_map["errors"].schema.type == "string"
        assert schema.field_map["data"].schema.field_map["code"].schema.format == (
            "int32"
        )


class TestBindings:
    @pytest.mark.parametrize(
        "value,expected",
        [
            ("BAR", Constant("BAR")),
            (5, Constant(5)),
            (
                "$response.body#/a/b",
                ResponseExtraction(("a", "b"), "$response.body#/a/b"),
            ),
            ("{$response.body#/id}", ResponseExtraction(("id",), "$response.body#/id")),
            ("$request.path.id", UnsupportedExpression("$request.path.id")),
            ("$response.header.X", UnsupportedExpression("$response.header.X")),
        ],
    )
    def test_parse_binding(self, value, expected):
        """
        Check the classification of link parameter values.
        """
        assert parse_binding(value) == expected


class TestSchemas:
    def test_ref_cycle_truncated(self):
        """
        Check that a self-referencing schema is cut where it recurs.
        """
        model = model_from_document(
            minimal_document(
                {
                    "/nodes": {
                        "get": {
                            "responses": {
                                "200": {
                                    "description": "OK",
                                    "content": {
                                        "application/json": {
                                            "schema": {
                                                "$ref": "#/components/schemas/Node"
                                            }
                                        }
                                    },
                                }
                            }
                        }
                    }
                },
                schemas={
                    "Node": {
                        "type": "object",
                        "properties": {
                            "id": {"type": "string"},
                            "children": {
                                "type": "array",
                                "items": {"$ref": "#/components/schemas/Node"},
                            },
                        },
                    }
                },
            )
        )
        node = model.endpoints[0].response(200).schema
        child = node.field_map["children"].schema.item
        assert node.name == "Node"
        assert child.truncated
        assert child.type == "any"

    def test_all_of_merge(self):
        """
        Check that allOf branches merge into one object schema.
        """
        base = ValueSchema(
            "object",
            fields=(
                FieldSpec("id", ValueSchema("string"), True),
            ),
        )
        extra = ValueSchema(
            "object",
            fields=(
                FieldSpec("name", ValueSchema("string", Constraints(max_length=5))),
            ),
        )
        merged = merge_all_of(
            ValueSchema("composite", composite_kind="allOf", branches=(base, extra))
        )
        assert merged.type == "object"
        assert [f.name for f in merged.fields] == ["id", "name"]
        assert merged.required_fields == ("id",)

    def test_examples_filtered_by_type(self):
        """
        Check that examples whose type does not match are dropped.
        """
        model = model_from_document(
            minimal_document(
                {
                    "/items": {
                        "get": {
                            "parameters": [
                                {
                                    "name": "n",
                                    "in": "query",
                                    "schema": {"type": "integer", "example": 3},
                                    "examples": {
                                        "good": {"value": 7},
                                        "bad": {"value": "seven"},
                                    },
                                }
                            ],
                            "responses": {"200": {"description": "OK"}},
                        }
                    }
                }
            )
        )
        (param,) = model.endpoints[0].params
        assert sorted(param.examples) == [3, 7]

    def test_nested_body_examples_filtered(self):
        """
        Check that body examples with a mistyped field or array item are dropped.
        """
        schema = {
            "type": "object",
            "properties": {
                "count": {"type": "integer"},
                "order": {
                    "type": "object",
                    "properties": {
                        "ids": {"type": "array", "items": {"type": "integer"}}
                    },
                },
            },
        }
        examples = {
            "good": {"value": {"count": 2, "order": {"ids": [1, 2]}}},
            "partial": {"value": {"order": {}}},
            "field": {"value": {"count": ["a", "b"]}},
            "item": {"value": {"order": {"ids": [1, "two"]}}},
        }
        model = model_from_document(
            minimal_document(
                {
                    "/counters": {
                        "post": {
                            "requestBody": {
                                "content": {
                                    "application/json": {
                                        "schema": schema,
                                        "examples": examples,
                                    }
                                }
                            },
                            "responses": {"201": {"description": "Created"}},
                        }
                    }
                }
            )
        )
        assert model.endpoints[0].body_schema.examples == (
            {"count": 2, "order": {"ids": [1, 2]}},
            {"order": {}},
        )

    def test_enum_and_nullable(self):
        """
        Check enum reading and nullable JSON-schema output.
        """
        schema = ValueSchema(
            "string", Constraints(enum=("A", "B")), nullable=True
        )
        assert schema.to_jsonschema() == {
            "type": ["string", "null"],
            "enum": ["A", "B", None],
        }

    def test_empty_enum_rejected(self):
        """
        Check that an empty enumeration is invalid.
        """
        with pytest.raises(ValueError):
            ValueSchema("string", Constraints(enum=()))

    def test_unknown_type_rejected(self):
        """
        Check that unknown schema types are invalid.
        """
        with pytest.raises(ValueError):
            ValueSchema("date")


class TestModel:
    def test_base_path(self):
        """
        Check that the base path is taken from the first server URL.
        """
        model, _ = _build(
            minimal_document(
                {"/a": {"get": {"responses": {"200": {"description": "OK"}}}}},
                servers=[{"url": "http://localhost:8080/api/v1/"}],
            )
        )
        assert model.base_path == "/api/v1"

    def test_swagger_body(self):
        """
        Check that a Swagger 2.0 body parameter becomes a request body.
        """
        document = {
            "swagger": "2.0",
            "info": {"title": "old", "version": "1"},
            "basePath": "/v2/",
            "paths": {
                "/pets": {
                    "post": {
                        "parameters": [
                            {
                                "name": "pet",
                                "in": "body",
                                "required": True,
                                "schema": {"$ref": "#/definitions/Pet"},
                            }
                        ],
                        "responses": {
                            "201": {
                                "description": "Created",
                                "schema": {"$ref": "#/definitions/Pet"},
                            }
                        },
                    }
                }
            },
            "definitions": {
                "Pet": {"type": "object", "properties": {"name": {"type": "string"}}}
            },
        }
        model, _ = _build(document)
        (endpoint,) = model.endpoints
        assert model.base_path == "/v2"
        assert endpoint.body_required
        assert endpoint.body_media_type == "application/json"
        assert endpoint.body_schema.name == "Pet"
        assert endpoint.response(201).schema.name == "Pet"

    def test_undeclared_path_parameter(self):
        """
        Check that an undeclared path parameter gets a required string parameter.
        """
        model, _ = _build(
            minimal_document(
                {"/u/{id}": {"get": {"responses": {"200": {"description": "OK"}}}}}
            )
        )
        (param,) = model.endpoints[0].params
        assert (param.name, param.location, param.required) == ("id", "path", True)
        assert param.schema.type == "string"

    def test_unknown_link_target_dropped(self):
        """
        Check that a link to a missing operation is dropped with a warning.
        """
        model, warnings = _build(
            minimal_document(
                {
                    "/a": {
                        "get": {
                            "responses": {
                                "200": {
                                    "description": "OK",
                                    "links": {"L": {"operationId": "missing"}},
                                }
                            }
                        }
                    }
                }
            )
        )
        assert model.endpoints[0].response(200).links == ()
        assert [w.code for w in warnings] == ["unknown-link-operation"]

    def test_response_precedence(self):
        """
        Check that exact statuses win over ranges, which win over default.
        """
        endpoint = EndpointSpec(
            "GET",
            "/a",
            responses=(
                ResponseSpec("default"),
                ResponseSpec("4XX"),
                ResponseSpec("404"),
            ),
        )
        assert endpoint.response(404).status == "404"
        assert endpoint.response(400).status == "4XX"
        assert endpoint.response(500).status == "default"
        assert endpoint.declares_status(404)
        assert not endpoint.declares_status(500)


class TestFilter:
    def test_prefix(self, crud_model):
        """
        Check filtering by path prefix, with an optional trailing star.
        """
        model = filter_endpoints(crud_model, prefix="/api/crud/products*")
        assert {e.path for e in model.endpoints} == {
            "/api/crud/products",
            "/api/crud/products/{id}",
        }

    def test_tags(self, links_model):
        """
        Check filtering by tag.
        """
        assert filter_endpoints(links_model, tags=["bb-links-application"]) == (
            links_model
        )

    def test_no_filters(self, links_model):
        """
        Check that no filters return the model itself.
        """
        assert filter_endpoints(links_model) is links_model

    def test_nothing_left(self, links_model):
        """
        Check that filtering out every endpoint is a configuration error.
        """
        with pytest.raises(ConfigurationError):
            filter_endpoints(links_model, prefix="/nope")


class TestNames:
    @pytest.mark.parametrize(
        "word,expected",
        [("users", "user"), ("categories", "category"), ("address", "address")],
    )
    def test_singular(self, word, expected):
        """
        Check crude singular forms.
        """
        assert singular(word) == expected

    @pytest.mark.parametrize(
        "word,expected",
        [("user", "users"), ("category", "categories"), ("day", "days")],
    )
    def test_plural(self, word, expected):
        """
        Check crude plural forms.
        """
        assert plural(word) == expected
