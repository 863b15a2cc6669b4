"""Message class for checkpoint.proto, built from a descriptor at import."""

from google.protobuf import descriptor_pb2, descriptor_pool, message_factory

_FILE_NAME = "pychdp/proto/checkpoint.proto"
_FIELD = descriptor_pb2.FieldDescriptorProto
_FIELDS = (
    ("schema_version", _FIELD.TYPE_UINT32),
    ("step", _FIELD.TYPE_UINT64),
    ("env_id", _FIELD.TYPE_STRING),
    ("config_json", _FIELD.TYPE_STRING),
    ("config_hash", _FIELD.TYPE_STRING),
    ("params_hash", _FIELD.TYPE_STRING),
    ("payload", _FIELD.TYPE_BYTES),
)


def _register(pool: descriptor_pool.DescriptorPool) -> None:
    try:
        pool.FindFileByName(_FILE_NAME)
        return
    except KeyError:
        pass
    file_proto = descriptor_pb2.FileDescriptorProto(
        name=_FILE_NAME, package="pychdp.proto", syntax="proto3"
    )
    message = file_proto.message_type.add(name="Checkpoint")
    for number, (name, field_type) in enumerate(_FIELDS, start=1):
        message.field.add(
            name=name, number=number, type=field_type, label=_FIELD.LABEL_OPTIONAL
        )
    pool.AddSerializedFile(file_proto.SerializeToString())


_pool = descriptor_pool.Default()
_register(_pool)

Checkpoint = message_factory.GetMessageClass(
    _pool.FindMessageTypeByName("pychdp.proto.Checkpoint")
)
