"""
Provides the CRUD fixture: users with client-chosen identifiers, products
pre-populated and creatable by ``PUT``, and orders with server-chosen
identifiers.
"""

from .fixture_api import (
    _BaseFixtureApi,
    error_response,
    json_content,
    json_response,
    openapi_document,
)

SEED_PRODUCTS = (("p1", "kettle"), ("p2", "toaster"))


def _ref(name):
    return {"$ref": f"#/components/schemas/{name}"}


def _id_param(name="id"):
    return {"name": name, "in": "path", "required": True, "schema": {"type": "string"}}


class CrudApi(_BaseFixtureApi):
    """
    Resource endpoints under ``/api/crud``.

    Creating a user whose identifier already exists returns 400, so suites that do
    not clean up fail when run twice.

    Parameters
    ----------
    clock : object, optional
        Clock. (Default: :class:`~apifuzz.transport.WallClock`)
    """

    name = "crud"
    root = "/api/crud"

    def reset(self):
        super().reset()
        self.users = dict()
        self.products = dict(SEED_PRODUCTS)
        self.orders = dict()
        self.order_counter = 0
        return

    def routes(self):
        return [
            ("POST", "/api/crud/users", self.create_user),
            ("GET", "/api/crud/users", self.list_users),
            ("GET", "/api/crud/user/{id}", self.get_user),
            ("DELETE", "/api/crud/user/{id}", self.delete_user),
            ("GET", "/api/crud/products", self.list_products),
            ("GET", "/api/crud/products/{id}", self.get_product),
            ("PUT", "/api/crud/products/{id}", self.put_product),
            ("DELETE", "/api/crud/products/{id}", self.delete_product),
            ("POST", "/api/crud/orders", self.create_order),
            ("DELETE", "/api/crud/order/{orderId}", self.delete_order),
        ]

    def create_user(self, request):
        payload = request.json
        if not isinstance(payload, dict) or not isinstance(payload.get("id"), str):
            return error_response(400, "id is required")
        if payload["id"] in self.users:
            return error_response(400, f"user {payload['id']} already exists")
        user = {"id": payload["id"], "name": str(payload.get("name", ""))}
        self.users[user["id"]] = user
        return json_response(201, user)

    def list_users(self, request):
        return json_response(200, list(self.users.values()))

    def get_user(self, request, id):
        if id not in self.users:
            return error_response(404, f"no user {id}")
        return json_response(200, self.users[id])

    def delete_user(self, request, id):
        if self.users.pop(id, None) is None:
            return error_response(404, f"no user {id}")
        return 204, dict(), ""

    def list_products(self, request):
        return json_response(
            200, [{"id": k, "name": v} for k, v in self.products.items()]
        )

    def get_product(self, request, id):
        if id not in self.products:
            return error_response(404, f"no product {id}")
        return json_response(200, {"id": id, "name": self.products[id]})

    def put_product(self, request, id):
        payload = request.json
        name = payload.get("name") if isinstance(payload, dict) else None
        if not isinstance(name, str):
            return error_response(400, "name is required")
        created = id not in self.products
        self.products[id] = name
        return json_response(201 if created else 200, {"id": id, "name": name})

    def delete_product(self, request, id):
        if self.products.pop(id, None) is None:
            return error_response(404, f"no product {id}")
        return 204, dict(), ""

    def create_order(self, request):
        payload = request.json
        if not isinstance(payload, dict) or not isinstance(payload.get("product"), str):
            return error_response(400, "product is required")
        self.order_counter += 1
        order = {"orderId": f"o{self.order_counter}", "product": payload["product"]}
        self.orders[order["orderId"]] = order
        return json_response(201, order)

    def delete_order(self, request, orderId):
        if self.orders.pop(orderId, None) is None:
            return error_response(404, f"no order {orderId}")
        return 204, dict(), ""

    def openapi(self):
        not_found = {"404": {"description": "Not found"}}
        deleted = {"204": {"description": "Deleted"}, **not_found}
        paths = {
            "/api/crud/users": {
                "post": {
                    "operationId": "createUser",
                    "requestBody": {
                        "required": True,
                        "content": json_content(_ref("NewUser")),
                    },
                    "responses": {
                        "201": {
                            "description": "Created",
                            "content": json_content(_ref("User")),
                        },
                        "400": {"description": "Invalid or duplicate"},
                    },
                },
                "get": {
                    "operationId": "listUsers",
                    "responses": {
                        "200": {
                            "description": "OK",
                            "content": json_content(
                                {"type": "array", "items": _ref("User")}
                            ),
                        }
                    },
                },
            },
            "/api/crud/user/{id}": {
                "get": {
                    "operationId": "getUser",
                    "parameters": [_id_param()],
                    "responses": {
                        "200": {
                            "description": "OK",
                            "content": json_content(_ref("User")),
                        },
                        **not_found,
                    },
                },
                "delete": {
                    "operationId": "deleteUser",
                    "parameters": [_id_param()],
                    "responses": deleted,
                },
            },
            "/api/crud/products": {
                "get": {
                    "operationId": "listProducts",
                    "responses": {
                        "200": {
                            "description": "OK",
                            "content": json_content(
                                {"type": "array", "items": _ref("Product")}
                            ),
                        }
                    },
                }
            },
            "/api/crud/products/{id}": {
                "get": {
                    "operationId": "getProduct",
                    "parameters": [_id_param()],
                    "responses": {
                        "200": {
                            "description": "OK",
                            "content": json_content(_ref("Product")),
                        },
                        **not_found,
                    },
                },
                "put": {
                    "operationId": "putProduct",
                    "parameters": [_id_param()],
                    "requestBody": {
                        "required": True,
                        "content": json_content(
                            {
                                "type": "object",
                                "required": ["name"],
                                "properties": {"name": {"type": "string"}},
                            }
                        ),
                    },
                    "responses": {
                        "200": {
                            "description": "Updated",
                            "content": json_content(_ref("Product")),
                        },
                        "201": {
                            "description": "Created",
                            "content": json_content(_ref("Product")),
                        },
                        "400": {"description": "Invalid"},
                    },
                },
                "delete": {
                    "operationId": "deleteProduct",
                    "parameters": [_id_param()],
                    "responses": deleted,
                },
            },
            "/api/crud/orders": {
                "post": {
                    "operationId": "createOrder",
                    "requestBody": {
                        "required": True,
                        "content": json_content(
                            {
                                "type": "object",
                                "required": ["product"],
                                "properties": {"product": {"type": "string"}},
                            }
                        ),
                    },
                    "responses": {
                        "201": {
                            "description": "Created",
                            "content": json_content(_ref("Order")),
                        },
                        "400": {"description": "Invalid"},
                    },
                }
            },
            "/api/crud/order/{orderId}": {
                "delete": {
                    "operationId": "deleteOrder",
                    "parameters": [_id_param("orderId")],
                    "responses": deleted,
                }
            },
        }
        schemas = {
            "NewUser": {
                "type": "object",
                "required": ["id", "name"],
                "properties": {
                    "id": {"type": "string", "pattern": "^[a-z]{4,8}$"},
                    "name": {"type": "string", "maxLength": 12},
                },
            },
            "User": {
                "type": "object",
                "properties": {"id": {"type": "string"}, "name": {"type": "string"}},
            },
            "Product": {
                "type": "object",
                "properties": {"id": {"type": "string"}, "name": {"type": "string"}},
            },
            "Order": {
                "type": "object",
                "properties": {
                    "orderId": {"type": "string"},
                    "product": {"type": "string"},
                },
            },
        }
        return openapi_document("crud fixture", paths, schemas)
