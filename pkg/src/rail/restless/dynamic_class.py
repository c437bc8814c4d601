from __future__ import annotations

from typing import Any, TypeVar

T = TypeVar("T", bound="DynamicClass")


class DynamicClass:
    """Base class for families of classes built by name from configuration

    Sub-classes register themselves when they are defined, so that
    ``create_from_dict`` can find them either by their bare class name or,
    after importing the module, by their fully qualified name.

    Classes that head a family of sub-classes should override ``sub_classes``
    so that each family keeps its own registry.
    """

    sub_classes: dict[str, type[DynamicClass]] = {}

    def __init_subclass__(cls) -> None:
        cls.sub_classes[cls.__name__] = cls

    @classmethod
    def full_class_name(cls) -> str:
        """Module path and class name, usable as ``class_name``"""
        return f"{cls.__module__}.{cls.__name__}"

    @classmethod
    def print_classes(cls) -> None:
        """Print the registered sub-classes"""
        print(f"{cls.__name__}")
        for key, val in cls.sub_classes.items():
            print(f"  {key} {val}")

    @classmethod
    def get_sub_class(cls: type[T], key: str, class_name: str | None = None) -> type[T]:
        """Get a registered sub-class by name, importing it if needed

        Parameters
        ----------
        key:
            Bare class name

        class_name:
            Fully qualified name, imported if ``key`` is not registered yet

        Returns
        -------
        type:
            Subclass in question
        """
        if key in cls.sub_classes:
            sub_class = cls.sub_classes[key]
            assert issubclass(sub_class, cls)
            return sub_class
        if class_name is None or "." not in class_name:
            raise KeyError(
                f"class {key} not found in {list(cls.sub_classes.keys())} "
                "and no module path was given to import it"
            )
        return cls.load_sub_class(class_name)

    @classmethod
    def load_sub_class(cls: type[T], class_name: str) -> type[T]:
        """Import a sub-class from its fully qualified name

        Parameters
        ----------
        class_name:
            Module path and class name, e.g., rail.restless.policy.FixedArmPolicy
        """
        tokens = class_name.split(".")
        module = ".".join(tokens[:-1])
        key = tokens[-1]
        __import__(module)
        sub_class = cls.get_sub_class(key)
        assert issubclass(sub_class, cls)
        return sub_class

    @classmethod
    def create_from_dict(
        cls: type[T],
        config_dict: dict[str, Any],
    ) -> T:
        """Build an object from a dict holding ``class_name`` and its options

        ``class_name`` is either a registered bare name, e.g. ``FixedArmPolicy``,
        or a fully qualified one
        """
        copy_config = config_dict.copy()
        try:
            class_name = copy_config.pop("class_name")
        except KeyError as msg:
            raise KeyError(
                f"class_name missing from {cls.__name__} definition {config_dict}"
            ) from msg
        key = class_name.split(".")[-1]
        sub_class = cls.get_sub_class(key, class_name)
        assert issubclass(sub_class, cls)
        return sub_class(**copy_config)
